// Compile a Toffoli on the bundled four-nucleus register, dump the pulse list
// and print its truth table.
#include "donorsim/device_io.hpp"
#include "donorsim/gates.hpp"

#include <cstdio>
#include <iostream>

using namespace donorsim;

int main() {
  const auto spec = default_device();
  Circuit c = toffoli_circuit(spec, {0, 1, 2}, 3);
  compile(c, spec);
  std::cout << dump_circuit(c, spec) << '\n';

  RunOptions o;
  o.drive.selectivity = DriveSelectivity::kResonantOnly;
  const RealMatrix t = truth_table(c, spec, {0, 1, 2, 3}, o);
  std::printf("in\\out ");
  for (int j = 0; j < 16; ++j) std::printf(" %s", bits_to_string(j, 4).c_str());
  std::printf("\n");
  for (int in = 0; in < 16; ++in) {
    std::printf("%s   ", bits_to_string(in, 4).c_str());
    for (int out = 0; out < 16; ++out) std::printf(" %4.2f", t(out, in));
    std::printf("\n");
  }
  std::printf("truth-table fidelity %.12f\n", truth_table_fidelity(t, toffoli_ideal(4, 3)));
}
