void hal_gpio_write(uint32_t gpio_base, uint32_t pin_mask, uint8_t state) {
    volatile uint32_t *gpio_odr = (uint32_t *)(gpio_base + 0x14);
    if (state) {
        *gpio_odr |= pin_mask;
    } else {
        *gpio_odr &= ~pin_mask;
    }
}
