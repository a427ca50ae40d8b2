#include "tickets/persist.hpp"

#include <string>

namespace tickets {

void MemoryLog::append(ByteView record) {
  std::lock_guard lock(mu_);
  records_.emplace_back(record.begin(), record.end());
}

std::vector<Bytes> MemoryLog::records() const {
  std::lock_guard lock(mu_);
  return records_;
}

Result<std::unique_ptr<FileLog>> FileLog::open(
    const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::out | std::ios::app);
  if (!out) {
    return make_error(ErrorCode::kInternal, "cannot open " + p.string());
  }
  return std::unique_ptr<FileLog>(new FileLog(std::move(out)));
}

void FileLog::append(ByteView record) {
  std::lock_guard lock(mu_);
  out_ << to_hex(record) << '\n';
  out_.flush();
}

Result<std::vector<Bytes>> read_log(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) return make_error(ErrorCode::kNotFound, "cannot read " + p.string());
  std::vector<Bytes> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto rec = from_hex(line);
    if (!rec) {
      return make_error(ErrorCode::kProtocolError,
                        p.string() + ":" + std::to_string(line_no) +
                            ": not a hex record");
    }
    out.push_back(std::move(*rec));
  }
  return out;
}

Status write_snapshot(const std::filesystem::path& p,
                      const std::vector<Bytes>& records) {
  std::filesystem::path tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::out | std::ios::trunc);
    if (!out) {
      return make_error(ErrorCode::kInternal, "cannot write " + tmp.string());
    }
    for (const auto& r : records) out << to_hex(r) << '\n';
    if (!out.flush()) {
      return make_error(ErrorCode::kInternal, "short write " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, p, ec);
  if (ec) return make_error(ErrorCode::kInternal, ec.message());
  return {};
}

}  // namespace tickets
