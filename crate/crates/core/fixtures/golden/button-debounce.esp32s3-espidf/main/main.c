/* button-debounce for esp32s3+espidf */
int main(void)
{
    return 0;
}
