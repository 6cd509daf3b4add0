#include <cstdio>
int main() { std::puts("hfur placeholder"); return 0; }
