#define USART2_BASE 0x40004400
