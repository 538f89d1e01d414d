void hal_gpio_toggle(uint32_t gpio_base, uint32_t pin_mask) {
    volatile uint32_t *gpio_odr = (uint32_t *)(gpio_base + 0x14);
    *gpio_odr ^= pin_mask;
}
