/* sos for nrf52840+zephyr */
int main(void)
{
    return 0;
}
