uint32_t hal_gpio_read(uint32_t gpio_base, uint32_t pin_mask) {
    volatile uint32_t *gpio_idr = (uint32_t *)(gpio_base + 0x10);
    uint32_t state = 0;
    if ((*gpio_idr & pin_mask) != 0) {
        state = 1;
    }
    return state;
}
