#include <cstdio>

int main(int argc, char** argv) {
    if (argc < 2) {
        std::fprintf(stderr, "usage: acceptance_tests <path-to-react-cmg>\n");
        return 2;
    }
    std::puts("acceptance_tests: placeholder");
    return 0;
}
