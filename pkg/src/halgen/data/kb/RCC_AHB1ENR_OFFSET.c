#define RCC_AHB1ENR_OFFSET 0x30
