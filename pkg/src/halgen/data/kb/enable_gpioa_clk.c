void enable_gpioa_clk(void) {
    volatile uint32_t *rcc_ahb1enr = (uint32_t *)(RCC_BASE + RCC_AHB1ENR_OFFSET);
    *rcc_ahb1enr |= 0x1;
}
