#include "sketchchain/trace.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace skch {

TraceSink TraceSink::to_file(const std::string& path) {
  auto f = std::make_shared<std::ofstream>(path);
  if (!*f) throw std::runtime_error("trace: cannot open " + path);
  f->precision(12);
  TraceSink t;
  t.owned_ = f;
  t.out_ = f.get();
  return t;
}

TraceSink TraceSink::to_stream(std::ostream& os) {
  TraceSink t;
  t.out_ = &os;
  return t;
}

void TraceSink::emit(const std::string& event, const std::vector<KV>& fields) const {
  if (!out_) return;
  (*out_) << event;
  for (const auto& [k, v] : fields) (*out_) << ' ' << k << '=' << v;
  (*out_) << '\n';
  out_->flush();
}

std::string trace_num(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

std::string trace_num(std::int64_t v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace skch
