#define USART_SR_OFFSET 0x00
