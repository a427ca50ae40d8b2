#pragma once

// Append-only record logs. On disk each record is the lowercase hex of its
// canonical encoding followed by '\n'.

#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <vector>

#include "tickets/bytes.hpp"
#include "tickets/result.hpp"

namespace tickets {

class AppendLog {
 public:
  virtual ~AppendLog() = default;
  virtual void append(ByteView record) = 0;
};

class MemoryLog final : public AppendLog {
 public:
  void append(ByteView record) override;
  std::vector<Bytes> records() const;

 private:
  mutable std::mutex mu_;
  std::vector<Bytes> records_;
};

class FileLog final : public AppendLog {
 public:
  // Opens for append, creating the file if needed.
  static Result<std::unique_ptr<FileLog>> open(const std::filesystem::path& p);
  void append(ByteView record) override;

 private:
  explicit FileLog(std::ofstream out) : out_(std::move(out)) {}

  std::mutex mu_;
  std::ofstream out_;
};

Result<std::vector<Bytes>> read_log(const std::filesystem::path& p);

// Replaces `p` with the given records (written to a temp file, then renamed).
Status write_snapshot(const std::filesystem::path& p,
                      const std::vector<Bytes>& records);

}  // namespace tickets
