#ifndef ESCORT_CLI_HPP
#define ESCORT_CLI_HPP

#include <CLI11.hpp>

#include <bit>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "escort/bench.hpp"
#include "escort/config.hpp"
#include "escort/default_config.hpp"
#include "escort/weight_io.hpp"

namespace escort::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kParseError = 2,
  kVerifyFailed = 3,
  kIoError = 4,
};

namespace detail {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::ios_base::failure("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

inline std::vector<LayerConfig> load_configs(const std::string& path) {
  return parse_config(path.empty() ? std::string(kDefaultConfig) : read_text(path));
}

inline std::vector<EngineKind> parse_engines(const std::vector<std::string>& names) {
  if (names.empty()) return {kConcreteEngines.begin(), kConcreteEngines.end()};
  std::vector<EngineKind> out;
  for (const auto& n : names) {
    const auto k = parse_engine(n);
    if (!k) throw UsageError("unknown engine '" + n + "'");
    out.push_back(*k);
  }
  return out;
}

inline void check_sparsities(const std::vector<double>& list) {
  for (double s : list)
    if (!(s >= 0.0 && s < 1.0)) throw UsageError("sparsity values must lie in [0, 1)");
}

inline std::vector<std::size_t> parse_buffers(const std::vector<std::string>& list) {
  if (list.empty()) return {1024, 16384, 262144, kUnboundedBuffer};
  std::vector<std::size_t> out;
  for (const auto& s : list) {
    if (s == "inf") {
      out.push_back(kUnboundedBuffer);
      continue;
    }
    const auto v = escort::detail::parse_number<std::uint64_t>(s);
    if (!v || *v == 0) throw UsageError("buffer sizes must be positive integers or 'inf'");
    out.push_back(static_cast<std::size_t>(*v));
  }
  return out;
}

/// Output sink that is either a file or a fallback stream.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : os_(&fallback) {
    if (!path.empty()) {
      file_.open(path, std::ios::trunc);
      if (!file_) throw std::ios_base::failure("cannot open '" + path + "' for writing");
      os_ = &file_;
    }
  }
  std::ostream& stream() { return *os_; }
  bool to_file() const { return file_.is_open(); }
  void close() {
    if (file_.is_open()) {
      file_.close();
      if (file_.fail()) throw std::ios_base::failure("writing the CSV file failed");
    }
  }

 private:
  std::ofstream file_;
  std::ostream* os_;
};

inline Tensor4D read_dense_weights(const std::string& path, const ConvShape& shape) {
  const std::string bytes = read_text(path);
  Tensor4D t(shape.weight_dims());
  if (bytes.size() != 4 * t.size())
    throw WeightFormatError("dense weight file holds " + std::to_string(bytes.size()) +
                            " bytes, expected " + std::to_string(4 * t.size()) +
                            " (M*C*R*S little-endian float32)");
  for (std::size_t i = 0; i < t.size(); ++i) {
    std::uint32_t u = 0;
    for (int b = 0; b < 4; ++b)
      u |= std::uint32_t{static_cast<unsigned char>(bytes[4 * i + b])} << (8 * b);
    t.data()[i] = std::bit_cast<float>(u);
  }
  return t;
}

}  // namespace detail

/// Entry point shared by the `escort` executable and the tests.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"escort: sparse CNN convolution engines and GPU access-model analysis"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> engine_names;
  std::size_t threads = 1;
  std::size_t repeats = 10;
  std::size_t warmup = 2;
  std::size_t trials = 1;
  std::string csv_path;
  std::optional<std::uint64_t> seed;
  std::vector<double> sparsities;
  std::vector<std::string> buffer_list;
  std::size_t lanes = 32, txn_bytes = 32;
  std::string layer_name, out_path, dense_path;
  bool stretch = false, inject_fault = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "layer config file (default: built-in layer set)");
    sub->add_option("--seed", seed, "override every layer's seed");
    sub->add_option("--sparsity", sparsities, "comma-separated sparsity list")->delimiter(',');
  };
  auto add_engines = [&](CLI::App* sub) {
    sub->add_option("--engine", engine_names,
                    "engines: dense-direct, lowered-dense (sgemm), lowered-sparse (csrmm), "
                    "sparse-direct (sconv), auto")
        ->delimiter(',');
    sub->add_option("--threads", threads, "worker threads per engine")->check(CLI::PositiveNumber);
  };

  auto* verify = app.add_subcommand("verify", "check every engine against the seven-loop reference");
  add_common(verify);
  add_engines(verify);
  verify->add_option("--trials", trials, "seeds per layer")->check(CLI::PositiveNumber);
  verify->add_flag("--inject-fault", inject_fault, "corrupt one stretched column index (verifier self-test)");

  auto* bench = app.add_subcommand("bench", "time engines and emit CSV");
  add_common(bench);
  add_engines(bench);
  bench->add_option("--repeats", repeats, "timed runs per engine")->check(CLI::PositiveNumber);
  bench->add_option("--warmup", warmup, "untimed runs per engine");
  bench->add_option("--csv", csv_path, "CSV output path (default: stdout)");

  auto* analyze = app.add_subcommand("analyze", "coalescing, reuse, intensity and dataflow traffic");
  add_common(analyze);
  analyze->add_option("--buffer", buffer_list, "comma-separated buffer sizes in words ('inf' allowed)")
      ->delimiter(',');
  analyze->add_option("--lanes", lanes, "modeled lanes per warp");
  analyze->add_option("--txn-bytes", txn_bytes, "memory transaction size in bytes");
  analyze->add_option("--csv", csv_path, "CSV output path (default: stdout)");

  auto* prune = app.add_subcommand("prune", "magnitude-prune weights and write a CSR weight file");
  add_common(prune);
  prune->add_option("--layer", layer_name, "layer whose weight shape to use (default: first)");
  prune->add_option("--dense", dense_path, "raw little-endian float32 M*C*R*S weights (default: generated)");
  prune->add_option("--out", out_path, "output weight file")->required();
  prune->add_flag("--stretch", stretch, "stretch column indices for the layer's padded input");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kOk;
    }
    err << "error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    detail::check_sparsities(sparsities);
    const auto configs = detail::load_configs(config_path);

    if (verify->parsed()) {
      VerifyOptions opt;
      opt.engines = detail::parse_engines(engine_names);
      opt.trials = trials;
      opt.workers = threads;
      opt.inject_fault = inject_fault;
      const auto rows = run_verify(expand_cases(configs, sparsities, seed), opt);
      print_verify(out, rows);
      const bool ok = all_pass(rows);
      out << (ok ? "verify: all engines match the reference\n" : "verify: FAILED\n");
      return ok ? kOk : kVerifyFailed;
    }

    if (bench->parsed()) {
      BenchOptions opt;
      opt.engines = detail::parse_engines(engine_names);
      opt.repeats = repeats;
      opt.warmup = warmup;
      opt.workers = threads;
      detail::Sink sink(csv_path, out);
      const auto recs = run_bench(expand_cases(configs, sparsities, seed), opt);
      write_bench_csv(sink.stream(), recs);
      sink.close();
      print_speedups(sink.to_file() ? out : err, recs);
      return kOk;
    }

    if (analyze->parsed()) {
      WarpModel model;
      model.lanes = lanes;
      model.txn_bytes = txn_bytes;
      try {
        model.validate();
      } catch (const std::invalid_argument& e) {
        throw detail::UsageError(e.what());
      }
      const auto buffers = detail::parse_buffers(buffer_list);
      detail::Sink sink(csv_path, out);
      write_analyze_csv(sink.stream(), run_analyze(expand_cases(configs, sparsities, seed), model, buffers));
      sink.close();
      return kOk;
    }

    if (prune->parsed()) {
      if (configs.empty()) throw detail::UsageError("config holds no layers");
      const LayerConfig* cfg = &configs.front();
      if (!layer_name.empty()) {
        cfg = nullptr;
        for (const auto& c : configs)
          if (c.name == layer_name) cfg = &c;
        if (!cfg) throw detail::UsageError("no layer named '" + layer_name + "'");
      }
      if (sparsities.size() > 1) throw detail::UsageError("prune takes a single --sparsity value");
      const double target = sparsities.empty() ? cfg->sparsity : sparsities.front();
      const std::uint64_t s = seed.value_or(cfg->seed);
      const Tensor4D dense = dense_path.empty()
                                 ? random_tensor(cfg->shape.weight_dims(), s + 1)
                                 : detail::read_dense_weights(dense_path, cfg->shape);
      const PruneReport rep = run_prune(dense, cfg->shape, target, stretch, out_path);
      out << "layer " << cfg->name << ": " << rep.rows << " x " << rep.kernel_cols << " weights\n"
          << "nnz " << rep.nnz << ", achieved sparsity " << escort::detail::fmt_fixed(rep.achieved_sparsity, 6) << '\n'
          << "csr footprint (2*nnz+M+1)*4 = " << rep.footprint_bytes << " bytes, dense "
          << rep.dense_bytes << " bytes ("
          << escort::detail::fmt_fixed(100.0 * static_cast<double>(rep.footprint_bytes) /
                                           static_cast<double>(rep.dense_bytes), 2)
          << "%)\n"
          << "wrote " << out_path << (rep.stretched ? " (stretched)" : "") << ", round trip "
          << (rep.round_trip_ok ? "ok" : "MISMATCH") << '\n';
      return rep.round_trip_ok ? kOk : kVerifyFailed;
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kParseError;
  } catch (const detail::UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const WeightFormatError& e) {
    err << "weight file error: " << e.what() << '\n';
    return kIoError;
  } catch (const std::ios_base::failure& e) {
    err << "i/o error: " << e.what() << '\n';
    return kIoError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}

}  // namespace escort::cli

#endif  // ESCORT_CLI_HPP
