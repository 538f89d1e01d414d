#include <stdint.h>
#include "hal.h"

#define GPIOA_BASE 0x40020000
#define USART_CR1_OFFSET 0x0C
#define USART_CR1_TE 0x8

// The application owns its test scaffolding: it enables the transmitter,
// drives the pin through the HAL, and reports the observed state over USART.

void app_uart_init(void) {
    volatile uint32_t *usart_cr1 = (uint32_t *)(USART2_BASE + USART_CR1_OFFSET);
    *usart_cr1 |= USART_CR1_TE;
}

void log_pass(void) {
    usart_send_byte(80);
    usart_send_byte(65);
    usart_send_byte(83);
    usart_send_byte(83);
    usart_send_byte(10);
}

void log_fail(void) {
    usart_send_byte(70);
    usart_send_byte(65);
    usart_send_byte(73);
    usart_send_byte(76);
    usart_send_byte(10);
}

int main(void) {
    enable_gpioa_clk();
    app_uart_init();
    set_io_mode(GPIOA_BASE, 0x20, 1);
    hal_gpio_write(GPIOA_BASE, 0x20, 1);
    if (hal_gpio_read(GPIOA_BASE, 0x20) == 1) {
        log_pass();
    } else {
        log_fail();
    }
    hal_gpio_toggle(GPIOA_BASE, 0x20);
    return 0;
}
