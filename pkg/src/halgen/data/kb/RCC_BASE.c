#define RCC_BASE 0x40023800
