#pragma once

// Output bookkeeping shared by the CLI subcommands, and the batch runner.

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "limbreg/image_io.hpp"
#include "limbreg/pipeline.hpp"
#include "limbreg/serialize.hpp"

namespace limbreg {

/// Tracks files and directories created by one command; unless committed,
/// everything it created is removed again when it goes out of scope.
class OutputTransaction {
 public:
  OutputTransaction() = default;
  OutputTransaction(const OutputTransaction&) = delete;
  OutputTransaction& operator=(const OutputTransaction&) = delete;
  ~OutputTransaction() {
    if (!committed_) rollback();
  }

  /// Creates `dir` and any missing parents, remembering the new ones.
  void make_dirs(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> fresh;
    for (auto p = dir; !p.empty() && !std::filesystem::exists(p); p = p.parent_path()) {
      fresh.push_back(p);
      if (p == p.parent_path()) break;
    }
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot create directory " + dir.string());
    dirs_.insert(dirs_.end(), fresh.begin(), fresh.end());  // deepest first
  }

  /// Registers a path about to be written.
  const std::filesystem::path& file(const std::filesystem::path& p) {
    files_.push_back(p);
    return files_.back();
  }

  void commit() { committed_ = true; }

  void rollback() noexcept {
    std::error_code ec;
    for (auto it = files_.rbegin(); it != files_.rend(); ++it) std::filesystem::remove(*it, ec);
    for (const auto& d : dirs_) std::filesystem::remove(d, ec);  // only succeeds when empty
    files_.clear();
    dirs_.clear();
  }

 private:
  std::vector<std::filesystem::path> files_;
  std::vector<std::filesystem::path> dirs_;
  bool committed_ = false;
};

/// warped.png, overlay.png, transform.json and report.json for one pair.
inline void write_registration_outputs(OutputTransaction& tx, const std::filesystem::path& dir, const PipelineResult& r,
                                       const PipelineConfig& cfg, const Json& inputs) {
  tx.make_dirs(dir);
  io::write_png(tx.file(dir / "warped.png"), r.warped);
  io::write_png(tx.file(dir / "overlay.png"), r.overlay);
  write_json(tx.file(dir / "transform.json"), transform_json(r));
  write_json(tx.file(dir / "report.json"), report_json(r, cfg, inputs));
}

inline Json error_json(const Error& e) {
  return Json{{"error", to_string(e.code())},
              {"code", static_cast<int>(e.code())},
              {"stage", e.stage()},
              {"message", e.detail()}};
}

// ---------------------------------------------------------------------------
// Batch

struct BatchEntry {
  std::string name;
  std::string fixed;   // as written in the manifest
  std::string moving;
};

/// One pair per line: "<name> <fixed> <moving>", '#' comments. Relative image
/// paths are resolved against the manifest's directory when run.
inline std::vector<BatchEntry> parse_manifest(std::string_view text) {
  std::vector<BatchEntry> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    BatchEntry e;
    if (!(fields >> e.name)) continue;
    std::string extra;
    if (!(fields >> e.fixed >> e.moving) || (fields >> extra))
      throw Error(ErrorCode::Parse, "manifest line " + std::to_string(line_no) + ": expected '<name> <fixed> <moving>'");
    if (e.name == "." || e.name == ".." || e.name.find_first_of("/\\") != std::string::npos)
      throw Error(ErrorCode::Parse, "manifest line " + std::to_string(line_no) + ": pair name must be a plain file name");
    if (std::any_of(out.begin(), out.end(), [&](const BatchEntry& o) { return o.name == e.name; }))
      throw Error(ErrorCode::Parse, "manifest line " + std::to_string(line_no) + ": duplicate pair name " + e.name);
    out.push_back(std::move(e));
  }
  if (out.empty()) throw Error(ErrorCode::Parse, "manifest lists no pairs");
  return out;
}

struct BatchResult {
  Json summary;
  int failures = 0;
  std::optional<Error> first_error;  // in manifest order
};

/// Registers every pair into out/<name>/ and writes out/summary.json. Pairs
/// run on up to `jobs` threads; each writes only its own directory and the
/// summary is assembled in manifest order, so the tree does not depend on
/// scheduling. A failed pair leaves no directory behind.
inline BatchResult run_batch(const std::vector<BatchEntry>& entries, const std::filesystem::path& base_dir,
                             const std::filesystem::path& out, const PipelineConfig& cfg, int jobs = 1) {
  cfg.validate();
  if (jobs < 1) throw Error(ErrorCode::Range, "jobs must be >= 1");
  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create " + out.string());

  std::vector<Json> rows(entries.size());
  std::vector<std::optional<Error>> errors(entries.size());
  std::atomic<std::size_t> next{0};

  auto resolve = [&](const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  };
  auto worker = [&] {
    for (std::size_t i = next++; i < entries.size(); i = next++) {
      const BatchEntry& e = entries[i];
      OutputTransaction tx;
      try {
        const Image fixed = detail::staged("load", [&] { return io::read_image(resolve(e.fixed)); });
        const Image moving = detail::staged("load", [&] { return io::read_image(resolve(e.moving)); });
        const PipelineResult r = run_pipeline(fixed, moving, cfg);
        write_registration_outputs(tx, out / e.name, r, cfg, Json{{"fixed", e.fixed}, {"moving", e.moving}});
        tx.commit();
        rows[i] = Json{{"name", e.name}, {"status", "ok"}, {"metrics", to_json(r.report)}};
      } catch (const Error& err) {
        errors[i] = err;
        rows[i] = Json{{"name", e.name}, {"status", "error"}};
        rows[i].update(error_json(err));
      }
    }
  };
  const int n_threads = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(jobs), entries.size()));
  std::vector<std::thread> pool;
  for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  BatchResult res;
  res.summary = Json{{"format_version", kFormatVersion}, {"tool_version", kToolVersion}, {"config", to_json(cfg)}};
  Json pairs = Json::array();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    pairs.push_back(rows[i]);
    if (errors[i]) {
      ++res.failures;
      if (!res.first_error) res.first_error = errors[i];
    }
  }
  res.summary["pairs"] = pairs;
  res.summary["failures"] = res.failures;
  write_json(out / "summary.json", res.summary);
  return res;
}

}  // namespace limbreg
