#include <charconv>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "waytrain/error.hpp"
#include "waytrain/geo.hpp"

namespace waytrain {
namespace {

template <typename T>
T parse_number(std::string_view text, std::size_t line_no) {
  T value{};
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  require(ec == std::errc{} && ptr == last, ErrorCode::Input,
          "trace line " + std::to_string(line_no) + ": bad number '" + std::string(text) + "'");
  return value;
}

void append_double(std::string& out, double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

}  // namespace

std::vector<GpsFix> read_trace_csv(std::istream& in) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::Input, "empty trace file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  require(line == kTraceCsvHeader, ErrorCode::Input, "unexpected trace header '" + line + "'");

  std::vector<GpsFix> fixes;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string_view> cols;
    std::string_view rest(line);
    for (;;) {
      const auto comma = rest.find(',');
      cols.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    require(cols.size() == 4, ErrorCode::Input,
            "trace line " + std::to_string(line_no) + ": expected 4 columns");
    GpsFix fix;
    fix.ts_ms = parse_number<TimestampMs>(cols[0], line_no);
    fix.point = {parse_number<double>(cols[1], line_no), parse_number<double>(cols[2], line_no)};
    check_valid(fix.point);
    if (!cols[3].empty()) fix.accuracy_m = parse_number<double>(cols[3], line_no);
    require(fixes.empty() || fix.ts_ms > fixes.back().ts_ms, ErrorCode::Ordering,
            "trace line " + std::to_string(line_no) + ": timestamps must increase");
    fixes.push_back(fix);
  }
  return fixes;
}

void write_trace_csv(std::ostream& out, std::span<const GpsFix> fixes) {
  std::string buf = kTraceCsvHeader;
  buf += '\n';
  for (const auto& f : fixes) {
    buf += std::to_string(f.ts_ms);
    buf += ',';
    append_double(buf, f.point.lat);
    buf += ',';
    append_double(buf, f.point.lon);
    buf += ',';
    if (f.accuracy_m) append_double(buf, *f.accuracy_m);
    buf += '\n';
  }
  out << buf;
}

}  // namespace waytrain
