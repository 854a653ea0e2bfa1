// Command-line front end: dataset generation, training, evaluation sweeps,
// codebook adaptation, baselines and the self test.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "checks.hpp"
#include "fdd/harness.hpp"

namespace {

using namespace fdd;

constexpr int kExitConfig = 2;
constexpr int kExitMissingFile = 3;
constexpr int kExitNumerical = 4;

struct Options {
  harness::RunConfig run;
  std::size_t bits = 12;
  std::string strategy = "progressive";
  std::string layout = "ula";
  std::string gain = "rayleigh";
  std::vector<std::string> methods{"proposed", "zf_csit", "lmmse_zf", "lloyd_rvq_zf"};
  bool individual = false;
  bool resume = false;
  bool no_replace = false;
  bool dkm_absolute = false;
  std::size_t deploy_bits = 0;
};

void add_options(CLI::App& app, Options& o) {
  auto& m = o.run.model;
  auto& t = o.run.train;
  auto& d = o.run.data;
  auto& g = d.geometry;
  auto& e = o.run.eval;
  const auto model = "Model";
  app.add_option("--antennas", m.antennas, "M, BS antennas")->group(model)->capture_default_str();
  app.add_option("--pilot_length", m.pilot_length, "L, pilot length")->group(model)->capture_default_str();
  app.add_option("--feature_dim", m.feature_dim, "D, feature dimension")->group(model)->capture_default_str();
  app.add_option("--hidden", m.hidden, "extractor hidden widths")->group(model)->capture_default_str();
  app.add_option("--bits", o.bits, "B, trained feedback bits")->group(model)->capture_default_str();
  app.add_option("--tiers", m.tiers, "N, RVQ tiers")->group(model)->capture_default_str();
  app.add_option("--egat_state_dim", m.egat.state_dim, "d, edge state width")->group(model)->capture_default_str();
  app.add_option("--egat_hidden", m.egat.init_hidden, "EGAT input/output hidden width")->group(model)->capture_default_str();
  app.add_option("--egat_layers", m.egat.layers, "G, EGAT update layers")->group(model)->capture_default_str();
  app.add_option("--alpha", m.egat.alpha, "antenna aggregation weight")->group(model)->capture_default_str();
  app.add_option("--beta", m.egat.beta, "user attention weight")->group(model)->capture_default_str();
  app.add_option("--power", m.power, "P, transmit power")->group(model)->capture_default_str();
  app.add_flag("--individual_extractors", o.individual, "one extractor per user slot")->group(model);
  app.add_option("--user_slots", m.user_slots, "extractor slots when individual")->group(model)->capture_default_str();

  const auto data = "Data";
  app.add_option("--data", d.path, "dataset file (generated in memory when empty)")->group(data);
  app.add_option("--array", o.layout, "ula or upa")->group(data)->capture_default_str();
  app.add_option("--nx", g.array.nx, "horizontal elements")->group(data)->capture_default_str();
  app.add_option("--ny", g.array.ny, "vertical elements (upa)")->group(data)->capture_default_str();
  app.add_option("--min_paths", g.min_paths, "fewest paths per user")->group(data)->capture_default_str();
  app.add_option("--max_paths", g.max_paths, "most paths per user")->group(data)->capture_default_str();
  app.add_option("--sector_center", g.sector_center_deg, "sector center, degrees")->group(data)->capture_default_str();
  app.add_option("--sector_width", g.sector_width_deg, "sector width, degrees")->group(data)->capture_default_str();
  app.add_option("--angle_spread", g.angle_spread_deg, "azimuth spread, degrees")->group(data)->capture_default_str();
  app.add_option("--gain", o.gain, "rayleigh or unit")->group(data)->capture_default_str();
  app.add_option("--data_seed", g.seed, "generator seed")->group(data)->capture_default_str();
  app.add_option("--environment", g.environment, "environment id")->group(data)->capture_default_str();
  app.add_option("--train_samples", d.train, "training split size")->group(data)->capture_default_str();
  app.add_option("--val_samples", d.val, "validation split size")->group(data)->capture_default_str();
  app.add_option("--test_samples", d.test, "test split size")->group(data)->capture_default_str();

  const auto train = "Training";
  app.add_option("--epochs", t.epochs, "total epochs, split over stages")->group(train)->capture_default_str();
  app.add_option("--batch_size", t.batch_size, "realizations per batch")->group(train)->capture_default_str();
  app.add_option("--lr", t.adam.base_lr, "peak learning rate")->group(train)->capture_default_str();
  app.add_option("--lambda", t.lambda, "quantization loss weight")->group(train)->capture_default_str();
  app.add_option("--train_snr", t.snr_db, "training SNR, dB")->group(train)->capture_default_str();
  app.add_option("--train_users", t.users, "K values drawn during training")->group(train)->capture_default_str();
  app.add_option("--strategy", o.strategy, "progressive or e2e")->group(train)->capture_default_str();
  app.add_option("--seed", t.seed, "training seed")->group(train)->capture_default_str();
  app.add_option("--val_report", t.val_samples, "validation realizations per stage (0 = all)")->group(train);
  app.add_option("--checkpoint", t.checkpoint_path, "checkpoint written after each epoch")->group(train);
  app.add_flag("--resume", o.resume, "continue from --checkpoint")->group(train);
  app.add_flag("--no_replace", o.no_replace, "keep unused codewords in place")->group(train);

  const auto eval = "Evaluation";
  app.add_option("--experiment", e.experiment, "experiment id written to every row")->group(eval);
  app.add_option("--methods", o.methods, "proposed, zf_csit, lmmse_zf, lloyd_rvq_zf")->group(eval);
  app.add_option("--snr", e.snr_db, "evaluation SNR list, dB")->group(eval);
  app.add_option("--eval_bits", e.bits, "deployed budgets")->group(eval);
  app.add_option("--users", e.users, "evaluation K list")->group(eval);
  app.add_option("--eval_seeds", e.seeds, "test-noise seeds")->group(eval);
  app.add_option("--eval_samples", e.samples, "test realizations per point (0 = all)")->group(eval);
  app.add_option("--lloyd_iters", e.lloyd_iters, "Lloyd iterations per baseline tier")->group(eval);

  const auto io = "Files and adaptation";
  app.add_option("--model", o.run.model_path, "input model file")->group(io);
  app.add_option("--out", o.run.output, "output file (CSV, model or dataset)")->group(io);
  app.add_option("--deploy_bits", o.deploy_bits, "B_deploy for shrink")->group(io);
  app.add_option("--extra_tiers", o.run.extra_tiers, "tiers added by expand")->group(io)->capture_default_str();
  app.add_option("--dkm_epsilon", o.run.dkm.epsilon, "DKM halting threshold")->group(io)->capture_default_str();
  app.add_option("--dkm_max_iter", o.run.dkm.max_iter, "DKM iteration cap")->group(io)->capture_default_str();
  app.add_option("--dkm_restarts", o.run.dkm.restarts, "k-means++ seedings per DKM run")->group(io)->capture_default_str();
  app.add_option("--dkm_temperature", o.run.dkm.temperature, "DKM softmax temperature")->group(io)->capture_default_str();
  app.add_flag("--dkm_absolute", o.dkm_absolute, "temperature is absolute, not relative to codeword spacing")->group(io);
}

// Maps the string-valued options onto the run config and validates it.
void finish(Options& o) {
  auto& r = o.run;
  harness::set_budget(r.model, o.bits, r.model.tiers);
  r.model.shared_extractor = !o.individual;
  if (o.strategy == "progressive") {
    r.train.strategy = train::Strategy::progressive;
  } else if (o.strategy == "e2e") {
    r.train.strategy = train::Strategy::e2e;
  } else {
    throw harness::ConfigError("strategy must be progressive or e2e");
  }
  if (o.layout == "ula") {
    r.data.geometry.array.layout = chan::ArrayLayout::ula;
  } else if (o.layout == "upa") {
    r.data.geometry.array.layout = chan::ArrayLayout::upa;
  } else {
    throw harness::ConfigError("array must be ula or upa");
  }
  if (o.gain == "rayleigh") {
    r.data.geometry.gain = chan::GainModel::rayleigh;
  } else if (o.gain == "unit") {
    r.data.geometry.gain = chan::GainModel::unit;
  } else {
    throw harness::ConfigError("gain must be rayleigh or unit");
  }
  r.eval.methods.clear();
  for (const auto& name : o.methods) r.eval.methods.push_back(harness::parse_method(name));
  r.train.replace_unused = !o.no_replace;
  r.dkm.relative_temperature = !o.dkm_absolute;
}

// Adopts the architecture stored in a model file so that checks run against it.
model::TransceiverModel load_into(Options& o) {
  model::TransceiverModel m = harness::load_model_file(o.run.model_path);
  o.run.model = m.config;
  o.bits = m.config.total_bits();
  return m;
}

void emit(const harness::ResultTable& table, const std::string& out) {
  if (out.empty()) {
    std::cout << table.csv();
  } else {
    table.write(out);
    std::fprintf(stderr, "wrote %zu rows to %s\n", table.rows().size(), out.c_str());
  }
}

void require_out(const Options& o, const char* what) {
  if (o.run.output.empty()) throw harness::ConfigError(std::string("--out is required for ") + what);
  if (!o.run.model_path.empty() &&
      std::filesystem::weakly_canonical(o.run.output) == std::filesystem::weakly_canonical(o.run.model_path))
    throw harness::ConfigError("--out must differ from --model; model files are never rewritten in place");
}

void print_history(const model::TransceiverModel& m) {
  for (const auto& h : m.meta.history) {
    std::fprintf(stderr, "stage %zu: %zu epochs, train loss %.4f, val sum rate %.4f, val L_Q %.4f\n", h.stage,
                 h.epochs, h.train_loss, h.val_sum_rate, h.val_quant_loss);
  }
}

int cmd_gen_data(Options& o) {
  if (o.run.data.path.empty()) throw harness::ConfigError("--data names the dataset file to write");
  const chan::ChannelDataset ds = harness::make_dataset(o.run.data);
  chan::save(ds, o.run.data.path);
  std::fprintf(stderr, "wrote %zu channels (M=%zu) to %s\n", ds.count, ds.antennas, o.run.data.path.c_str());
  return 0;
}

int cmd_train(Options& o) {
  require_out(o, "train");
  const chan::ChannelDataset ds = harness::obtain_dataset(o.run.data);
  train::TrainConfig cfg = o.run.train;
  const auto t0 = std::chrono::steady_clock::now();
  cfg.on_epoch = [&](const train::EpochReport& r) {
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::fprintf(stderr, "stage %zu epoch %zu: loss %.4f, sum rate %.4f, L_Q %.4f (%.0f s)\n", r.stage_index + 1,
                 r.epoch, r.mean_loss, r.mean_sum_rate, r.mean_quant_loss, s);
  };
  model::TransceiverModel m;
  if (o.resume) {
    if (cfg.checkpoint_path.empty()) throw harness::ConfigError("--resume needs --checkpoint");
    if (!std::filesystem::exists(cfg.checkpoint_path))
      throw harness::MissingFileError("checkpoint '" + cfg.checkpoint_path + "' not found");
    m = train::resume(cfg.checkpoint_path, cfg, ds);
  } else {
    m = train::train(o.run.model, cfg, ds);
  }
  model::save_model(m, o.run.output);
  print_history(m);
  std::fprintf(stderr, "saved %s\n", o.run.output.c_str());
  return 0;
}

int cmd_sweep(Options& o, const char* experiment, bool need_model) {
  std::optional<model::TransceiverModel> m;
  if (need_model || !o.run.model_path.empty()) {
    m = load_into(o);
  }
  if (o.run.eval.experiment == "eval") o.run.eval.experiment = experiment;
  o.run.validate();
  const chan::ChannelDataset ds = harness::obtain_dataset(o.run.data);
  harness::Evaluator ev(ds, o.run, m ? &*m : nullptr);
  emit(harness::sweep(ev, o.run), o.run.output);
  return 0;
}

int cmd_shrink(Options& o) {
  require_out(o, "shrink");
  const model::TransceiverModel m = load_into(o);
  if (o.deploy_bits == 0) throw harness::ConfigError("--deploy_bits is required");
  adapt::DkmResult report;
  report.converged = true;
  const model::TransceiverModel s = adapt::shrink(m, o.deploy_bits, mix_seed(o.run.train.seed, 0x736872696e6b),
                                                  o.run.dkm, &report);
  model::save_model(s, o.run.output);
  std::fprintf(stderr, "shrunk %zu -> %zu bits (%zu tiers)", m.codebook.total_bits(), s.codebook.total_bits(),
               s.codebook.tiers.size());
  if (report.iterations > 0) {
    std::fprintf(stderr, "; DKM %zu iterations, displacement %.3g%s", report.iterations, report.displacement,
                 report.converged ? "" : " (WARNING: iteration cap reached)");
  }
  std::fprintf(stderr, "\n");
  return 0;
}

int cmd_expand(Options& o) {
  require_out(o, "expand");
  const model::TransceiverModel m = load_into(o);
  o.run.validate();
  const chan::ChannelDataset ds = harness::obtain_dataset(o.run.data);
  const model::TransceiverModel x = adapt::expand(m, o.run.extra_tiers, ds, o.run.train);
  model::save_model(x, o.run.output);
  print_history(x);
  std::fprintf(stderr, "expanded %zu -> %zu bits\n", m.codebook.total_bits(), x.codebook.total_bits());
  return 0;
}

int cmd_selftest() {
  const std::vector<std::pair<const char*, checks::Outcome (*)()>> suite{
      {"codeword arithmetic", [] { return checks::codeword_arithmetic(); }},
      {"RVQ brute-force oracle", [] { return checks::rvq_oracle(1000, 1); }},
      {"gradient suite", [] { return checks::gradient_suite(1e-5); }},
      {"NSVQ exactness", [] { return checks::nsvq_exactness(1000, 2); }},
      {"EGAT equivariance", [] { return checks::egat_equivariance(30, 3); }},
      {"ZF correctness", [] { return checks::zf_correctness(100, 4); }},
      {"DKM quality", [] { return checks::dkm_quality(20, 5); }},
  };
  bool ok = true;
  for (const auto& [name, fn] : suite) {
    const checks::Outcome r = fn();
    ok = ok && r.pass;
    std::printf("%s  %-24s %s\n", r.pass ? "PASS" : "FAIL", name, r.detail.c_str());
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FDD massive-MIMO feedback and precoding laboratory"};
  app.set_config("--config", "", "flat key = value file; command-line flags override it");
  app.allow_config_extras(false);
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  add_options(app, o);
  const std::vector<std::pair<const char*, const char*>> commands{
      {"gen-data", "generate a channel dataset and save it to --data"},
      {"train", "train a model and save it to --out"},
      {"eval", "evaluate --model at the configured points"},
      {"sweep-snr", "sum rate against SNR"},
      {"sweep-bits", "sum rate against the deployed budget (shrinking the model)"},
      {"sweep-users", "sum rate against K with one model"},
      {"shrink", "compress --model to --deploy_bits and save to --out"},
      {"expand", "add --extra_tiers tiers to --model, train them, save to --out"},
      {"baseline", "evaluate the classical baselines only"},
      {"selftest", "run the oracle and gradient checks"},
  };
  for (const auto& [name, help] : commands) app.add_subcommand(name, help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    if (cmd == "selftest") return cmd_selftest();
    if (cmd == "sweep-snr" && app.count("--snr") == 0) o.run.eval.snr_db = {-10, -5, 0, 5, 10, 15, 20};
    if (cmd == "sweep-users" && app.count("--users") == 0) o.run.eval.users = {2, 3, 4};
    if (cmd == "baseline" && app.count("--methods") == 0) o.methods = {"zf_csit", "lmmse_zf", "lloyd_rvq_zf"};
    finish(o);
    if (cmd == "sweep-bits" && app.count("--eval_bits") == 0) {
      o.run.eval.bits.clear();
    }
    if (cmd != "eval" && cmd != "sweep-snr" && cmd != "sweep-bits" && cmd != "sweep-users" && cmd != "baseline")
      o.run.validate();
    if (cmd == "gen-data") return cmd_gen_data(o);
    if (cmd == "train") return cmd_train(o);
    if (cmd == "shrink") return cmd_shrink(o);
    if (cmd == "expand") return cmd_expand(o);
    if (cmd == "sweep-bits" && o.run.eval.bits.empty()) {
      const model::TransceiverModel m = harness::load_model_file(o.run.model_path);
      for (std::size_t b = m.config.tier_bits; b <= m.codebook.total_bits(); b += m.config.tier_bits)
        o.run.eval.bits.push_back(b);
    }
    if (cmd == "baseline") {
      for (auto meth : o.run.eval.methods)
        if (meth == harness::Method::proposed) throw harness::ConfigError("baseline evaluates baselines only");
      return cmd_sweep(o, "baseline", false);
    }
    return cmd_sweep(o, cmd.c_str(), true);
  } catch (const harness::MissingFileError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitMissingFile;
  } catch (const model::ModelFileError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitMissingFile;
  } catch (const chan::DatasetError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitMissingFile;
  } catch (const train::TrainingError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kExitNumerical;
  } catch (const num::NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kExitNumerical;
  } catch (const std::domain_error& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
