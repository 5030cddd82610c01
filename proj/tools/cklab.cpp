#include <cstdio>
int main() { std::puts("cklab"); return 0; }
