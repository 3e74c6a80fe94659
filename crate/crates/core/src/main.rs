fn main() {
    std::process::exit(skillbench::cli::main_with_args(std::env::args_os()));
}
