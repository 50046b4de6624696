// Copyright 2026 The ACD Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "acd/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "acd/binary_io.hpp"
#include "acd/codec.hpp"
#include "acd/error.hpp"
#include "acd/metrics.hpp"
#include "acd/policy.hpp"
#include "acd/sim.hpp"
#include "acd/trajectory.hpp"

namespace fs = std::filesystem;

namespace acd {

namespace {

// Bad flags, missing inputs and other problems the caller must fix.
class UsageError : public Error {
 public:
  using Error::Error;
};

void require_file(const std::string& flag, const std::string& path) {
  if (path.empty()) throw UsageError(flag + " is required");
  if (!fs::is_regular_file(path)) throw UsageError(flag + ": no such file '" + path + "'");
}

fs::path prepare_out(const std::string& out) {
  if (out.empty()) throw UsageError("--out is required");
  fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory '" + out + "': " + ec.message());
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  os << text;
  if (!os) throw Error("write failed for '" + path.string() + "'");
}

// key=value echo of every option of the subcommand, sorted by name.
std::string config_echo(const CLI::App& sub) {
  std::map<std::string, std::string> kv;
  for (const CLI::Option* opt : sub.get_options()) {
    if (opt->get_lnames().empty()) continue;
    const std::string& name = opt->get_lnames().front();
    if (name == "help" || name == "help-all" || name == "config") continue;
    std::string value;
    if (opt->count() > 0) {
      const auto& res = opt->results();
      if (opt->get_multi_option_policy() == CLI::MultiOptionPolicy::TakeAll) {
        for (std::size_t i = 0; i < res.size(); ++i) value += (i ? "," : "") + res[i];
      } else {
        value = res.back();
      }
    } else if (opt->get_expected_min() == 0) {
      value = "false";  // flag not given
    } else {
      value = opt->get_default_str();
    }
    kv[name] = value;
  }
  std::string out = "command=" + sub.get_name() + "\n";
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

// Reads flat key=value lines ('#' starts a comment) as flag tokens.
std::vector<std::string> config_tokens(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw UsageError("--config: cannot open '" + path + "'");
  std::vector<std::string> tokens;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      if (a == std::string::npos) return std::string();
      const auto b = s.find_last_not_of(" \t\r");
      return s.substr(a, b - a + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError("--config " + path + ":" + std::to_string(lineno) +
                       ": expected key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw UsageError("--config " + path + ": empty key");
    tokens.push_back("--" + key + "=" + value);
  }
  return tokens;
}

// Splices config-file tokens right after the subcommand name so that flags
// given on the command line (parsed later) override them.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::vector<std::string> out;
  std::string config;
  std::vector<std::string> rest;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a == "--config") {
      if (i + 1 >= args.size()) throw UsageError("--config needs a file");
      config = args[++i];
    } else if (a.rfind("--config=", 0) == 0) {
      config = a.substr(9);
    } else {
      rest.push_back(a);
    }
  }
  if (config.empty()) return rest;
  const auto tokens = config_tokens(config);
  // rest[0] is the program name, rest[1] the subcommand
  out.assign(rest.begin(), rest.begin() + std::min<std::ptrdiff_t>(2, static_cast<std::ptrdiff_t>(rest.size())));
  out.insert(out.end(), tokens.begin(), tokens.end());
  if (rest.size() > 2) out.insert(out.end(), rest.begin() + 2, rest.end());
  return out;
}

struct CodecFlags {
  std::size_t chunk_len = 10;
  std::size_t nq = 2;
  std::size_t codebook_size = 128;
  std::size_t latent_dim = 64;
  std::size_t pool_factor = 5;
  std::size_t hidden = 32;
  std::size_t layers = 3;
  std::size_t kernel_size = 4;
  std::size_t steps = 3000;
  std::size_t batch_size = 32;
  double lr = 3e-4;
  double beta = 0.25;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;

  CodecConfig config() const {
    CodecConfig c;
    c.chunk_len = chunk_len;
    c.num_quantizers = nq;
    c.codebook_size = codebook_size;
    c.latent_dim = latent_dim;
    c.pool_factor = pool_factor;
    c.hidden = hidden;
    c.encoder_layers = layers;
    c.kernel_size = kernel_size;
    c.steps = steps;
    c.batch_size = batch_size;
    c.lr = lr;
    c.beta = beta;
    c.weight_decay = weight_decay;
    c.seed = seed;
    c.validate();
    return c;
  }
};

void fail_usage_if(bool cond, const std::string& msg) {
  if (cond) throw UsageError(msg);
}

}  // namespace

int run_cli(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  try {
    args = expand_config(raw_args);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  CLI::App app{"Action chunk codec, policy surrogate and control-loop simulator", "acd"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default()->multi_option_policy(
      CLI::MultiOptionPolicy::TakeLast);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");
  // accepted here so that it shows up in help; expand_config consumes it
  std::string unused_config;

  // gen-data
  std::string kind_name = "sine-mixture";
  std::size_t count = 100, length = 200;
  double rate = 50.0;
  std::uint64_t seed = 0;
  std::string out_dir;
  bool csv = false;
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic command dataset");
  gen->add_option("--kind", kind_name, "sine-mixture | piecewise-constant | pursuit-demo");
  gen->add_option("--count", count, "Number of trajectories");
  gen->add_option("--length", length, "Frames per trajectory");
  gen->add_option("--rate", rate, "Sample rate in Hz");
  gen->add_option("--seed", seed, "Random seed");
  gen->add_option("--out", out_dir, "Output directory (writes data.traj)");
  gen->add_flag("--csv", csv, "Also write data.csv");

  // train-codec
  CodecFlags cf;
  std::string data_path;
  std::size_t log_every = 100;
  auto* train = app.add_subcommand("train-codec", "Train the action chunk codec");
  train->add_option("--data", data_path, ".traj dataset");
  train->add_option("--out", out_dir, "Output directory (codec.ckpt, loss.csv)");
  train->add_option("--seed", cf.seed, "Random seed");
  train->add_option("--chunk-len", cf.chunk_len, "Chunk length N");
  train->add_option("--nq", cf.nq, "Quantizer layers N_q");
  train->add_option("--codebook-size", cf.codebook_size, "Codes per layer K");
  train->add_option("--latent-dim", cf.latent_dim, "Latent width D");
  train->add_option("--pool-factor", cf.pool_factor, "Temporal pooling factor");
  train->add_option("--hidden", cf.hidden, "Hidden channel width");
  train->add_option("--layers", cf.layers, "Encoder conv layers");
  train->add_option("--kernel-size", cf.kernel_size, "Conv kernel size");
  train->add_option("--steps", cf.steps, "Optimizer steps");
  train->add_option("--batch-size", cf.batch_size, "Chunks per step");
  train->add_option("--lr", cf.lr, "AdamW learning rate");
  train->add_option("--beta", cf.beta, "Commitment weight");
  train->add_option("--weight-decay", cf.weight_decay, "AdamW weight decay");
  train->add_option("--log-every", log_every, "Steps per loss.csv row");

  // eval-codec
  std::vector<std::string> codec_paths;
  auto* eval = app.add_subcommand("eval-codec", "Reconstruction metrics of codec checkpoints");
  eval->add_option("--codec", codec_paths, "Checkpoint(s)")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  eval->add_option("--data", data_path, ".traj dataset");
  eval->add_option("--out", out_dir, "Output directory (eval.csv, report-<i>.txt)");

  // train-policy
  std::string codec_path;
  std::size_t policy_steps = 2000, policy_hidden = 128, stride = 0, max_samples = 0;
  double policy_lr = 1e-3;
  auto* tpol = app.add_subcommand("train-policy", "Train the token policy head on a frozen codec");
  tpol->add_option("--codec", codec_path, "Codec checkpoint");
  tpol->add_option("--data", data_path, ".traj dataset");
  tpol->add_option("--out", out_dir, "Output directory (head.ckpt, policy_log.csv)");
  tpol->add_option("--steps", policy_steps, "Optimizer steps");
  tpol->add_option("--lr", policy_lr, "AdamW learning rate");
  tpol->add_option("--hidden", policy_hidden, "Hidden width");
  tpol->add_option("--stride", stride, "Chunk stride (default: chunk length)");
  tpol->add_option("--max-samples", max_samples, "Keep only the first samples (0 = all)");
  tpol->add_option("--seed", seed, "Random seed");

  // simulate
  SimConfig sc;
  std::string policy_name = "oracle-pursuit", head_path;
  auto* sim = app.add_subcommand("simulate", "Run the chunked control-loop simulator");
  sim->add_option("--fl", sc.f_l, "Controller rate in Hz");
  sim->add_option("--fm", sc.f_m, "Policy inference rate in Hz");
  sim->add_option("--chunk", sc.l_ac, "Frames per inference");
  sim->add_option("--latency", sc.latency, "Inference latency in s (default 1/fm)");
  sim->add_option("--duration", sc.duration, "Episode length in s");
  sim->add_option("--seed", sc.seed, "Random seed");
  sim->add_option("--policy", policy_name, "oracle-pursuit | trained-head");
  sim->add_option("--codec", codec_path, "Codec checkpoint (trained-head)");
  sim->add_option("--head", head_path, "Policy head checkpoint (trained-head)");
  sim->add_flag("--preempt", sc.preempt, "New chunks replace queued frames");
  sim->add_option("--out", out_dir, "Output directory (summary.txt, trace.csv, staleness.txt)");

  // sweep
  std::vector<double> fms{5.0};
  std::vector<std::size_t> chunks{1, 5, 10};
  std::vector<std::uint64_t> seeds{0};
  SimConfig sweep_base;
  auto* swp = app.add_subcommand("sweep", "Simulator summary over a grid of configurations");
  swp->add_option("--fl", sweep_base.f_l, "Controller rate in Hz");
  swp->add_option("--fm", fms, "Policy rates in Hz")->delimiter(',')
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  swp->add_option("--chunk", chunks, "Chunk lengths")->delimiter(',')
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  swp->add_option("--seeds", seeds, "Seeds")->delimiter(',')
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  swp->add_option("--duration", sweep_base.duration, "Episode length in s");
  swp->add_flag("--preempt", sweep_base.preempt, "New chunks replace queued frames");
  swp->add_option("--out", out_dir, "Output directory (sweep.csv)");

  // inspect-codebook
  auto* insp = app.add_subcommand("inspect-codebook", "Per-layer codebook usage");
  insp->add_option("--codec", codec_path, "Codec checkpoint");
  insp->add_option("--data", data_path, ".traj dataset (optional; else EMA counts)");

  for (auto* sub : {gen, train, eval, tpol, sim, swp, insp}) {
    sub->add_option("--config", unused_config, "key=value defaults file");
  }

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    if (!rev.empty()) rev.pop_back();  // program name
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return kExitOk;
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (*gen) {
      const auto kind = parse_synthetic_kind(kind_name);
      fail_usage_if(!kind, "--kind: unknown generator '" + kind_name +
                               "' (sine-mixture, piecewise-constant, pursuit-demo)");
      const fs::path dir = prepare_out(out_dir);
      const Dataset data = generate_synthetic(*kind, count, length, rate, seed);
      write_traj(dir / "data.traj", data);
      if (csv) write_traj_csv(dir / "data.csv", data);
      write_text(dir / "config.txt", config_echo(*gen));
      out << "wrote " << data.size() << " trajectories to " << (dir / "data.traj").string()
          << '\n';
      return kExitOk;
    }

    if (*train) {
      require_file("--data", data_path);
      const CodecConfig cfg = cf.config();
      const fs::path dir = prepare_out(out_dir);
      const Dataset data = read_traj(data_path);
      const NormalizationStats stats = fit_normalization(data);
      const auto chunk_list =
          dataset_chunks(data, stats, cfg.chunk_len, (cfg.chunk_len + 1) / 2);
      fail_usage_if(chunk_list.empty(), "--data: no trajectory holds a chunk of length " +
                                            std::to_string(cfg.chunk_len));
      write_text(dir / "config.txt", config_echo(*train));
      std::ostringstream log;
      log << "step,rec,com,total";
      for (std::size_t i = 0; i < cfg.num_quantizers; ++i) log << ",perplexity_" << i;
      log << ",reseeded\n";
      TrainOptions opts;
      opts.log_every = std::max<std::size_t>(1, log_every);
      opts.on_record = [&](const TrainRecord& r) {
        log << r.step << ',' << io::format_double(r.rec) << ',' << io::format_double(r.com)
            << ',' << io::format_double(r.total);
        for (double p : r.perplexity) log << ',' << io::format_double(p);
        log << ',' << r.reseeded << '\n';
        out << "step " << r.step << " rec " << r.rec << " com " << r.com << '\n';
      };
      try {
        auto result = train_codec(chunk_list, stats, cfg, opts);
        result.codec.save(dir / "codec.ckpt");
      } catch (const TrainingAborted& e) {
        e.last_good().save(dir / "codec.ckpt");
        write_text(dir / "loss.csv", log.str());
        err << "error: " << e.what() << " (last good state saved)\n";
        return kExitRuntime;
      }
      write_text(dir / "loss.csv", log.str());
      out << "wrote " << (dir / "codec.ckpt").string() << '\n';
      return kExitOk;
    }

    if (*eval) {
      fail_usage_if(codec_paths.empty(), "--codec is required");
      for (const auto& p : codec_paths) require_file("--codec", p);
      require_file("--data", data_path);
      const Dataset data = read_traj(data_path);
      std::vector<metrics::ReconstructionReport> reports;
      std::size_t layers = 0;
      for (const auto& p : codec_paths) {
        const Codec codec = Codec::load(p);
        const std::size_t n = codec.config().chunk_len;
        const auto chunk_list = dataset_chunks(data, codec.normalization(), n, n);
        fail_usage_if(chunk_list.empty(),
                      "--data: no trajectory holds a chunk of length " + std::to_string(n));
        auto rep = evaluate_codec(codec, chunk_list);
        rep.label = fs::path(p).filename().string() + "@N=" + std::to_string(n);
        layers = std::max(layers, rep.perplexity.size());
        reports.push_back(std::move(rep));
      }
      std::string table = metrics::ReconstructionReport::csv_header(kCommandDims, layers) + "\n";
      for (auto& r : reports) {
        r.perplexity.resize(layers, 0.0);
        table += r.to_csv_row() + "\n";
      }
      for (const auto& r : reports) out << r.to_kv() << '\n';
      out << table;
      if (!out_dir.empty()) {
        const fs::path dir = prepare_out(out_dir);
        write_text(dir / "eval.csv", table);
        for (std::size_t i = 0; i < reports.size(); ++i) {
          write_text(dir / ("report-" + std::to_string(i) + ".txt"), reports[i].to_kv());
        }
        write_text(dir / "config.txt", config_echo(*eval));
      }
      return kExitOk;
    }

    if (*tpol) {
      require_file("--codec", codec_path);
      require_file("--data", data_path);
      const fs::path dir = prepare_out(out_dir);
      const Codec codec = Codec::load(codec_path);
      const Dataset data = read_traj(data_path);
      const FeatureProjector features;
      LabeledDataset labeled =
          label_dataset(codec, data, features, stride ? stride : codec.config().chunk_len);
      if (max_samples > 0) labeled = labeled.head(max_samples);
      PolicyHead head = PolicyHead::for_codec(codec, features.config(), policy_hidden, seed);
      PolicyTrainConfig pc;
      pc.steps = policy_steps;
      pc.lr = policy_lr;
      pc.seed = seed;
      std::ostringstream log;
      log << "step,loss,accuracy\n";
      auto res = train_policy(head, labeled, pc, [&](const PolicyRecord& r) {
        log << r.step << ',' << io::format_double(r.loss) << ','
            << io::format_double(r.accuracy) << '\n';
      });
      head.save(dir / "head.ckpt");
      write_text(dir / "policy_log.csv", log.str());
      write_text(dir / "config.txt", config_echo(*tpol));
      out << "samples=" << labeled.size() << '\n'
          << "token_accuracy=" << io::format_double(res.final_accuracy) << '\n';
      return kExitOk;
    }

    if (*sim) {
      const auto kind = parse_policy_kind(policy_name);
      fail_usage_if(!kind, "--policy: unknown policy '" + policy_name + "'");
      sc.policy = *kind;
      sc.validate();
      SimTrace trace;
      if (sc.policy == PolicyKind::kTrainedHead) {
        require_file("--codec", codec_path);
        require_file("--head", head_path);
        const Codec codec = Codec::load(codec_path);
        const PolicyHead head = PolicyHead::load(head_path);
        const FeatureProjector features;
        TrainedHeadPolicy policy(head, codec, features);
        trace = run_sim(sc, &policy);
      } else {
        trace = run_sim(sc);
      }
      const std::string summary = trace.summary.to_kv();
      out << summary;
      if (!out_dir.empty()) {
        const fs::path dir = prepare_out(out_dir);
        write_text(dir / "summary.txt", summary);
        write_text(dir / "trace.csv", trace.to_csv());
        write_text(dir / "staleness.txt", staleness_profile(trace).to_kv());
        write_text(dir / "config.txt", config_echo(*sim));
      }
      return kExitOk;
    }

    if (*swp) {
      fail_usage_if(fms.empty() || chunks.empty() || seeds.empty(),
                    "--fm, --chunk and --seeds need at least one value");
      std::vector<SimConfig> configs;
      for (double fm : fms) {
        for (std::size_t l : chunks) {
          for (std::uint64_t s : seeds) {
            SimConfig c = sweep_base;
            c.f_m = fm;
            c.l_ac = l;
            c.seed = s;
            c.validate();
            configs.push_back(c);
          }
        }
      }
      const std::string table = sweep_csv(sweep(configs));
      out << table;
      if (!out_dir.empty()) {
        const fs::path dir = prepare_out(out_dir);
        write_text(dir / "sweep.csv", table);
        write_text(dir / "config.txt", config_echo(*swp));
      }
      return kExitOk;
    }

    if (*insp) {
      require_file("--codec", codec_path);
      const Codec codec = Codec::load(codec_path);
      const Codebook& cb = codec.codebook();
      const std::size_t k = cb.size();
      std::vector<std::vector<double>> usage(cb.num_layers(), std::vector<double>(k, 0.0));
      std::string source = "ema_count";
      if (!data_path.empty()) {
        require_file("--data", data_path);
        const std::size_t n = codec.config().chunk_len;
        const auto chunk_list =
            dataset_chunks(read_traj(data_path), codec.normalization(), n, n);
        fail_usage_if(chunk_list.empty(), "--data: no chunk of length " + std::to_string(n));
        const auto q = codec.quantize(codec.encode(stack_chunks(chunk_list)));
        for (std::size_t r = 0; r < q.indices.positions(); ++r) {
          for (std::size_t i = 0; i < cb.num_layers(); ++i) {
            usage[i][static_cast<std::size_t>(q.indices.at(r, i))] += 1.0;
          }
        }
        source = "data";
      } else {
        for (std::size_t i = 0; i < cb.num_layers(); ++i) {
          for (std::size_t c = 0; c < k; ++c) usage[i][c] = cb.ema_count()[i * k + c];
        }
      }
      out << "layers=" << cb.num_layers() << '\n'
          << "codebook_size=" << k << '\n'
          << "usage_source=" << source << '\n';
      // Data usage counts whole assignments. EMA counts are per-step rates, so
      // they are scaled to a dead-code window before applying the threshold.
      const auto& cc = codec.config();
      const double scale = source == "data" ? 1.0 : static_cast<double>(cc.dead_code_window);
      const double threshold = source == "data" ? 1.0 : cc.dead_code_threshold;
      for (std::size_t i = 0; i < cb.num_layers(); ++i) {
        const auto dead = std::count_if(usage[i].begin(), usage[i].end(),
                                        [&](double u) { return u * scale < threshold; });
        out << "layer" << i << ".perplexity=" << io::format_double(metrics::perplexity(usage[i]))
            << '\n'
            << "layer" << i << ".dead_codes=" << dead << '\n';
      }
      return kExitOk;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  return run_cli(std::vector<std::string>(argv, argv + argc), out, err);
}

}  // namespace acd
