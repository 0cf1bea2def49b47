#include <cstdio>

int main() {
  std::puts("bosonq: subcommands not wired yet");
  return 1;
}
