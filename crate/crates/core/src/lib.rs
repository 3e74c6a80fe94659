pub mod assembler;
pub mod cli;
pub mod frontmatter;
pub mod harness;
pub mod metrics;
pub mod peripheral;
pub mod pipeline;
pub mod platform;
pub mod provider;
pub mod skills;
pub mod tasks;
pub mod toolchain;
