#pragma once

#include <memory>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace skch {

// Line-delimited structured trace: "event key=value key=value ...", one line
// per event. A default-constructed sink discards everything.
class TraceSink {
public:
  using KV = std::pair<std::string, std::string>;

  TraceSink() = default;
  static TraceSink to_file(const std::string& path);
  static TraceSink to_stream(std::ostream& os);

  bool enabled() const { return out_ != nullptr; }
  void emit(const std::string& event, const std::vector<KV>& fields) const;

private:
  std::shared_ptr<std::ostream> owned_;
  std::ostream* out_ = nullptr;
};

std::string trace_num(double v);
std::string trace_num(std::int64_t v);

}  // namespace skch
