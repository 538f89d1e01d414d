#include <stdint.h>

#define RCC_BASE 0x40023800
#define RCC_AHB1ENR_OFFSET 0x30
#define USART2_BASE 0x40004400
#define USART_SR_OFFSET 0x00
#define USART_DR_OFFSET 0x04
#define USART_FLAG_TXE 0x80

void enable_gpioa_clk(void) {
    volatile uint32_t *rcc_ahb1enr = (uint32_t *)(RCC_BASE + RCC_AHB1ENR_OFFSET);
    *rcc_ahb1enr |= 0x1;
}

void set_io_mode(uint32_t gpio_base, uint32_t pin_mask, uint8_t mode) {
    volatile uint32_t *GPIO_MODER = (uint32_t *)(gpio_base + 0x00);
    uint8_t pin_number = 0;
    while ((pin_mask >> pin_number) != 1) {
        pin_number++;
    }
    *GPIO_MODER &= ~(0x3 << (pin_number * 2));
    *GPIO_MODER |= (mode << (pin_number * 2));
}

void hal_gpio_write(uint32_t gpio_base, uint32_t pin_mask, uint8_t state) {
    volatile uint32_t *gpio_odr = (uint32_t *)(gpio_base + 0x14);
    if (state) {
        *gpio_odr |= pin_mask;
    } else {
        *gpio_odr &= ~pin_mask;
    }
}

uint32_t hal_gpio_read(uint32_t gpio_base, uint32_t pin_mask) {
    volatile uint32_t *gpio_idr = (uint32_t *)(gpio_base + 0x10);
    uint32_t state = 0;
    if ((*gpio_idr & pin_mask) != 0) {
        state = 1;
    }
    return state;
}

void hal_gpio_toggle(uint32_t gpio_base, uint32_t pin_mask) {
    volatile uint32_t *gpio_odr = (uint32_t *)(gpio_base + 0x14);
    *gpio_odr ^= pin_mask;
}

void usart_send_byte(uint8_t data) {
    volatile uint32_t *usart_sr = (uint32_t *)(USART2_BASE + USART_SR_OFFSET);
    volatile uint32_t *usart_dr = (uint32_t *)(USART2_BASE + USART_DR_OFFSET);
    while ((*usart_sr & USART_FLAG_TXE) == 0) {
    }
    *usart_dr = data;
}
