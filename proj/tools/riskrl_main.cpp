#include <cstdio>

int main() {
    std::puts("riskrl: CLI under construction");
    return 1;
}
