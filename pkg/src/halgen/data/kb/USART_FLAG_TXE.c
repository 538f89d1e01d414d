#define USART_FLAG_TXE 0x80
