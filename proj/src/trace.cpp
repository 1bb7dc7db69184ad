#include "valet/trace.hpp"

#include <zlib.h>

#include <array>
#include <fstream>
#include <set>

namespace valet {

using nlohmann::json;

namespace {

const std::set<std::string>& known_ops() {
  static const std::set<std::string> k = {"open",  "write",  "read",   "fsync",
                                          "close", "rename", "unlink", "truncate"};
  return k;
}

}  // namespace

json trace_op_to_json(const TraceOp& op) {
  json j;
  j["seq"] = op.seq;
  j["op"] = op.op;
  if (!op.path.empty()) j["path"] = op.path;
  if (!op.path2.empty()) j["path2"] = op.path2;
  if (op.fd >= 0) j["fd"] = op.fd;
  if (op.size != 0) j["size"] = op.size;
  if (op.offset >= 0) j["offset"] = op.offset;
  if (op.data_seed != 0) j["data_seed"] = op.data_seed;
  if (op.flags != 0) j["flags"] = op.flags;
  if (!op.label.empty()) j["label"] = op.label;
  return j;
}

TraceOp trace_op_from_json(const json& j) {
  TraceOp op;
  try {
    op.seq = j.at("seq").get<uint64_t>();
    op.op = j.at("op").get<std::string>();
    op.path = j.value("path", std::string{});
    op.path2 = j.value("path2", std::string{});
    op.fd = j.value("fd", int64_t{-1});
    op.size = j.value("size", uint64_t{0});
    op.offset = j.value("offset", int64_t{-1});
    op.data_seed = j.value("data_seed", uint64_t{0});
    op.flags = j.value("flags", uint32_t{0});
    op.label = j.value("label", std::string{});
  } catch (const json::exception& e) {
    throw ValetError(Errc::bad_trace, std::string("malformed trace op: ") + e.what());
  }
  if (!known_ops().count(op.op))
    throw ValetError(Errc::bad_trace, "unknown trace op '" + op.op + "'");
  return op;
}

void write_trace(const std::string& file, const std::vector<TraceOp>& ops) {
  const bool gz = file.size() > 3 && file.compare(file.size() - 3, 3, ".gz") == 0;
  if (gz) {
    gzFile f = gzopen(file.c_str(), "wb");
    if (!f) throw ValetError(Errc::io_error, "cannot open trace for writing: " + file);
    for (const auto& op : ops) {
      std::string line = trace_op_to_json(op).dump();
      line.push_back('\n');
      if (gzwrite(f, line.data(), static_cast<unsigned>(line.size())) !=
          static_cast<int>(line.size())) {
        gzclose(f);
        throw ValetError(Errc::io_error, "short gzip write: " + file);
      }
    }
    if (gzclose(f) != Z_OK) throw ValetError(Errc::io_error, "gzip close failed: " + file);
    return;
  }
  std::ofstream f(file, std::ios::binary | std::ios::trunc);
  if (!f) throw ValetError(Errc::io_error, "cannot open trace for writing: " + file);
  for (const auto& op : ops) f << trace_op_to_json(op).dump() << '\n';
  f.flush();
  if (!f) throw ValetError(Errc::io_error, "trace write failed: " + file);
}

std::vector<TraceOp> read_trace(const std::string& file) {
  // zlib's gz layer reads uncompressed files as-is, so one code path covers
  // both plain and gzipped traces regardless of file name.
  gzFile f = gzopen(file.c_str(), "rb");
  if (!f) throw ValetError(Errc::io_error, "cannot open trace: " + file);
  std::vector<TraceOp> ops;
  std::string line;
  std::array<char, 1 << 16> buf;
  uint64_t lineno = 0;
  bool pending = false;
  auto finish_line = [&]() {
    ++lineno;
    if (line.empty()) return;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      gzclose(f);
      throw ValetError(Errc::bad_trace,
                       file + ":" + std::to_string(lineno) + ": not JSON: " + e.what());
    }
    ops.push_back(trace_op_from_json(j));
    line.clear();
  };
  while (gzgets(f, buf.data(), static_cast<int>(buf.size())) != nullptr) {
    line.append(buf.data());
    pending = true;
    if (!line.empty() && line.back() == '\n') {
      line.pop_back();
      if (!line.empty() && line.back() == '\r') line.pop_back();
      finish_line();
      pending = false;
    }
  }
  int errnum = 0;
  gzerror(f, &errnum);
  if (errnum != Z_OK && errnum != Z_STREAM_END) {
    gzclose(f);
    throw ValetError(Errc::io_error, "trace read failed: " + file);
  }
  if (pending) finish_line();  // final line without trailing newline
  gzclose(f);
  return ops;
}

TraceCensus census(const std::vector<TraceOp>& ops) {
  TraceCensus c;
  c.total_ops = ops.size();
  // A file's label is set at open and inherited by every fd-directed op.
  std::map<int64_t, std::string> fd_label;
  for (const auto& op : ops) {
    std::string label = op.label;
    if (op.op == "open") {
      fd_label[op.fd] = label;
    } else if (label.empty() && op.fd >= 0) {
      auto it = fd_label.find(op.fd);
      if (it != fd_label.end()) label = it->second;
    }
    if (label.empty()) label = "-";
    auto& row = c.by_label[label];
    ++row.ops;
    if (op.op == "write") row.bytes_written += op.size;
  }
  return c;
}

}  // namespace valet
