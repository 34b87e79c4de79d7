#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace homoenc::io {

/// Formats a double with 17 significant digits; the result always reads back
/// as a floating-point JSON number and round-trips bit-exactly.
std::string format_double(double v);

/// Minimal streaming JSON emitter for the file formats that pin float
/// formatting (dataset JSONL, metrics). Produces compact single-line output.
class JsonWriter {
 public:
  JsonWriter& begin_object();
  JsonWriter& end_object();
  JsonWriter& begin_array();
  JsonWriter& end_array();
  JsonWriter& key(std::string_view k);
  JsonWriter& value(double v);
  JsonWriter& value(std::int64_t v);
  JsonWriter& value(std::uint64_t v);
  JsonWriter& value(int v) { return value(static_cast<std::int64_t>(v)); }
  JsonWriter& value(bool v);
  JsonWriter& value(std::string_view v);
  JsonWriter& value(const char* v) { return value(std::string_view(v)); }
  JsonWriter& array(const std::vector<double>& xs);

  template <class V>
  JsonWriter& field(std::string_view k, const V& v) {
    key(k);
    return value(v);
  }

  const std::string& str() const { return out_; }

 private:
  void separator();

  std::string out_;
  std::vector<bool> first_;
  bool after_key_ = false;
};

}  // namespace homoenc::io
