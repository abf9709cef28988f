#include "ddpi/csv.hpp"

#include <cmath>
#include <cstdio>

namespace ddpi {

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) return "0";  // folds -0 into 0
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void CsvWriter::header(const std::vector<std::string>& cols) {
  for (const auto& c : cols) field(c);
  end_row();
}

void CsvWriter::field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) {
    put(s);
    return;
  }
  std::string q = "\"";
  for (char ch : s) {
    if (ch == '"') q += '"';
    q += ch;
  }
  q += '"';
  put(q);
}

void CsvWriter::put(const std::string& s) {
  if (!first_) os_ << ',';
  os_ << s;
  first_ = false;
}

void CsvWriter::end_row() {
  os_ << '\n';
  first_ = true;
}

}  // namespace ddpi
