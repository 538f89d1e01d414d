void usart_send_byte(uint8_t data) {
    volatile uint32_t *usart_sr = (uint32_t *)(USART2_BASE + USART_SR_OFFSET);
    volatile uint32_t *usart_dr = (uint32_t *)(USART2_BASE + USART_DR_OFFSET);
    while ((*usart_sr & USART_FLAG_TXE) == 0) {
    }
    *usart_dr = data;
}
