// Writes the single-record stream used by the CLI stats test.
#include <fstream>
#include <iostream>

#include "gvt/codec.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: write_test_stream OUT\n";
    return 2;
  }
  gvt::TokenStream s;
  s.mask = {1};
  s.dynamics = {gvt::TokenRecord{{12, 40, 3, 17, 9}, 1234}};
  const auto bytes = gvt::serialize(s);
  std::ofstream os(argv[1], std::ios::binary);
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  return os ? 0 : 1;
}
