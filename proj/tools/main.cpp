#include <cstdio>

int main() {
  std::puts("lhylab: CLI under construction");
  return 0;
}
