#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace ddpi {

/// Reals are written with 17 significant digits ("%.17g"), so a value
/// round-trips exactly and identical runs produce identical bytes.
std::string format_real(double v);

class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& os) : os_(os) {}

  void header(const std::vector<std::string>& cols);
  void field(double v) { put(format_real(v)); }
  void field(long long v) { put(std::to_string(v)); }
  void field(std::uint64_t v) { put(std::to_string(v)); }
  void field(int v) { put(std::to_string(v)); }
  void field(const std::string& s);
  void field(const char* s) { field(std::string(s)); }
  void end_row();

 private:
  void put(const std::string& s);
  std::ostream& os_;
  bool first_ = true;
};

}  // namespace ddpi
