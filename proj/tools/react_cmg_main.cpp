#include <cstdio>

int main() {
    std::fprintf(stderr, "react-cmg: not wired up yet\n");
    return 2;
}
