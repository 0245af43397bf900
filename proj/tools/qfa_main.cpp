#include <cstdio>

int main() {
  std::puts("qfa: placeholder");
  return 0;
}
