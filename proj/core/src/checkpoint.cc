// Copyright 2026 The MaskGRPO Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <system_error>

#include <fmt/format.h>

#include "maskgrpo/errors.h"
#include "maskgrpo/policy.h"

namespace maskgrpo {

namespace {

constexpr char kMagic[4] = {'M', 'G', 'P', 'O'};
constexpr std::size_t kHeaderBytes = 4 + 4 + 4 * 4 + 8;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  Reader(const std::string& bytes, const std::filesystem::path& path) : bytes_(bytes), path_(path) {}

  std::uint64_t get(int width) {
    if (pos_ + static_cast<std::size_t>(width) > bytes_.size()) {
      throw CheckpointError(CheckpointError::Code::kTruncated,
                            fmt::format("{}: truncated at byte {}", path_.string(), bytes_.size()));
    }
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += static_cast<std::size_t>(width);
    return v;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  const std::string& bytes_;
  const std::filesystem::path& path_;
  std::size_t pos_ = 4;
};

}  // namespace

void save_checkpoint(const PolicyParams& params, const std::filesystem::path& path) {
  const PolicyArch& a = params.arch();
  std::string buf(kMagic, sizeof(kMagic));
  buf.reserve(kHeaderBytes + 8 * params.size());
  put_u32(buf, kCheckpointVersion);
  put_u32(buf, static_cast<std::uint32_t>(a.n));
  put_u32(buf, static_cast<std::uint32_t>(a.k));
  put_u32(buf, static_cast<std::uint32_t>(a.hidden));
  put_u32(buf, static_cast<std::uint32_t>(a.embed));
  put_u64(buf, params.size());
  for (double v : params.values()) put_u64(buf, std::bit_cast<std::uint64_t>(v));

  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw CheckpointError(CheckpointError::Code::kIo,
                            fmt::format("cannot open {} for writing", tmp.string()));
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out.flush()) {
      throw CheckpointError(CheckpointError::Code::kIo, fmt::format("write to {} failed", tmp.string()));
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    throw CheckpointError(CheckpointError::Code::kIo,
                          fmt::format("cannot move {} into place: {}", path.string(), ec.message()));
  }
}

PolicyParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw CheckpointError(CheckpointError::Code::kIo, fmt::format("cannot open {}", path.string()));
  }
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 4) {
    throw CheckpointError(CheckpointError::Code::kTruncated,
                          fmt::format("{}: file too short for a header", path.string()));
  }
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw CheckpointError(CheckpointError::Code::kBadMagic,
                          fmt::format("{}: bad magic, not a checkpoint", path.string()));
  }
  Reader r(bytes, path);
  const auto version = static_cast<std::uint32_t>(r.get(4));
  if (version != kCheckpointVersion) {
    throw CheckpointError(CheckpointError::Code::kVersionMismatch,
                          fmt::format("{}: format version {} (supported: {})", path.string(),
                                      version, kCheckpointVersion));
  }
  PolicyArch arch;
  arch.n = static_cast<int>(r.get(4));
  arch.k = static_cast<int>(r.get(4));
  arch.hidden = static_cast<int>(r.get(4));
  arch.embed = static_cast<int>(r.get(4));
  const std::uint64_t count = r.get(8);
  try {
    arch.validate();
  } catch (const InvalidArgument& e) {
    throw CheckpointError(CheckpointError::Code::kArchMismatch,
                          fmt::format("{}: {}", path.string(), e.what()));
  }
  if (count != arch.param_count()) {
    throw CheckpointError(CheckpointError::Code::kArchMismatch,
                          fmt::format("{}: header declares {} parameters, architecture needs {}",
                                      path.string(), count, arch.param_count()));
  }
  if (r.remaining() < 8 * count) {
    throw CheckpointError(CheckpointError::Code::kTruncated,
                          fmt::format("{}: truncated, {} of {} parameter bytes present",
                                      path.string(), r.remaining(), 8 * count));
  }
  if (r.remaining() > 8 * count) {
    throw CheckpointError(CheckpointError::Code::kIo,
                          fmt::format("{}: {} unexpected trailing bytes", path.string(),
                                      r.remaining() - 8 * count));
  }
  std::vector<double> values(count);
  for (auto& v : values) {
    v = std::bit_cast<double>(r.get(8));
    if (!std::isfinite(v)) {
      throw CheckpointError(CheckpointError::Code::kIo,
                            fmt::format("{}: non-finite parameter value", path.string()));
    }
  }
  return PolicyParams(arch, std::move(values));
}

PolicyParams load_checkpoint(const std::filesystem::path& path, const PolicyArch& expected) {
  PolicyParams p = load_checkpoint(path);
  if (!(p.arch() == expected)) {
    const PolicyArch& a = p.arch();
    throw CheckpointError(
        CheckpointError::Code::kArchMismatch,
        fmt::format("{}: checkpoint is N={} K={} H={} E={}, expected N={} K={} H={} E={}",
                    path.string(), a.n, a.k, a.hidden, a.embed, expected.n, expected.k,
                    expected.hidden, expected.embed));
  }
  return p;
}

}  // namespace maskgrpo
