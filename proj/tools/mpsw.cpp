// mpsw: train, sample, and analyze MPS Born machines on binary image data.
//
// Every subcommand writes its artifacts (plus a manifest.json recording the
// command line, configuration, input/output digests, and timings) under the
// directory given by --out, and nowhere else.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <Eigen/Core>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mpsw/analysis.hpp"
#include "mpsw/classify.hpp"
#include "mpsw/dataio.hpp"
#include "mpsw/errors.hpp"
#include "mpsw/mps.hpp"
#include "mpsw/sampling.hpp"
#include "mpsw/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mpsw;

namespace {

constexpr const char* kVersion = "mpsw 1.0.0";

int run(const std::vector<std::string>& args);

// ---------------------------------------------------------------- utilities

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open for hashing: " + path);
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    EVP_DigestUpdate(ctx, buf, static_cast<size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  hex << std::hex << std::setfill('0');
  for (unsigned int i = 0; i < len; ++i) hex << std::setw(2) << int(digest[i]);
  return hex.str();
}

// Resolves an input path against MPSW_DATA_DIR when it does not exist as given.
std::string resolve_input(const std::string& path) {
  if (fs::exists(path)) return path;
  const char* base = std::getenv("MPSW_DATA_DIR");
  if (base && *base) {
    fs::path candidate = fs::path(base) / path;
    if (fs::exists(candidate)) return candidate.string();
  }
  return path;
}

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

// Tracks one command's artifacts and writes manifest.json at the end.
class Manifest {
 public:
  Manifest(std::string command, std::vector<std::string> argv, fs::path out_dir)
      : command_(std::move(command)), argv_(std::move(argv)),
        out_dir_(std::move(out_dir)),
        start_(std::chrono::steady_clock::now()) {
    fs::create_directories(out_dir_);
  }

  const fs::path& out_dir() const { return out_dir_; }
  fs::path out_path(const std::string& name) const { return out_dir_ / name; }

  void input(const std::string& path) {
    inputs_.push_back({{"path", path}, {"sha256", sha256_file(path)}});
  }
  void output(const std::string& name) { output_names_.push_back(name); }
  void config(const std::string& key, const json& value) { config_[key] = value; }
  void seed(std::uint64_t s) { seeds_.push_back(s); }

  void write() {
    json outs = json::array();
    for (const auto& name : output_names_)
      outs.push_back({{"path", name},
                      {"sha256", sha256_file(out_path(name).string())}});
    auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                  std::chrono::steady_clock::now() - start_).count();
    json m{{"tool", kVersion},
           {"command", command_},
           {"argv", argv_},
           {"config", config_},
           {"seeds", seeds_},
           {"inputs", inputs_},
           {"outputs", outs},
           {"wall_ms", ms}};
    std::ofstream out(out_dir_ / "manifest.json");
    out << m.dump(2) << "\n";
  }

 private:
  std::string command_;
  std::vector<std::string> argv_;
  fs::path out_dir_;
  json config_ = json::object();
  json inputs_ = json::array();
  std::vector<std::string> output_names_;
  std::vector<std::uint64_t> seeds_;
  std::chrono::steady_clock::time_point start_;
};

void write_json_report(const fs::path& path, const json& report) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path.string());
  out << report.dump(2) << "\n";
}

std::vector<double> parse_double_list(const std::string& csv) {
  std::vector<double> out;
  std::stringstream s(csv);
  std::string item;
  while (std::getline(s, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw InputError("bad numeric list entry: '" + item + "'");
    }
  }
  if (out.empty()) throw InputError("empty numeric list");
  return out;
}

std::vector<long> parse_long_list(const std::string& csv) {
  std::vector<long> out;
  for (double v : parse_double_list(csv)) out.push_back(std::lround(v));
  return out;
}

Mps load_model(const std::string& path) {
  Mps m = Mps::load_file(path);
  if (m.ortho_center() != 0) m.canonicalize(0);
  return m;
}

Dataset load_data(const std::string& path, int digit) {
  Dataset d = load_dataset_file(path);
  if (digit >= 0) {
    d = d.filter_label(digit);
    if (d.empty())
      throw InputError("no images with label " + std::to_string(digit));
  }
  return d;
}

// ------------------------------------------------------------- subcommands

struct IngestArgs {
  std::string images, labels, out;
  int threshold = 128;
  double split_fraction = 0.0;
  std::uint64_t seed = 0;
  int digit = -1;
};

void cmd_ingest(const IngestArgs& a, const std::vector<std::string>& argv) {
  Manifest man("ingest", argv, a.out);
  std::string images = resolve_input(a.images);
  std::string labels = a.labels.empty() ? "" : resolve_input(a.labels);
  man.input(images);
  if (!labels.empty()) man.input(labels);
  man.config("threshold", a.threshold);
  man.config("split_fraction", a.split_fraction);
  man.config("digit", a.digit);
  man.seed(a.seed);

  auto gray = load_idx_images(images, labels);
  Dataset data = binarize_all(gray, a.threshold);
  if (a.digit >= 0) {
    data = data.filter_label(a.digit);
    if (data.empty())
      throw InputError("no images with label " + std::to_string(a.digit));
  }
  json report{{"n_images", data.size()},
              {"height", data.images[0].height},
              {"width", data.images[0].width},
              {"threshold", a.threshold}};
  double black = 0;
  for (const auto& im : data.images) black += im.count_ones();
  report["mean_black_pixels"] = black / static_cast<double>(data.size());

  if (a.split_fraction > 0.0) {
    auto [first, second] = split(data, a.split_fraction, a.seed);
    second.split_tag = SplitTag::validation;
    save_dataset_file(first, man.out_path("train.bin").string());
    save_dataset_file(second, man.out_path("validation.bin").string());
    man.output("train.bin");
    man.output("validation.bin");
    report["n_train"] = first.size();
    report["n_validation"] = second.size();
  } else {
    save_dataset_file(data, man.out_path("data.bin").string());
    man.output("data.bin");
  }
  write_json_report(man.out_path("report.json"), report);
  man.output("report.json");
  man.write();
}

struct TrainArgs {
  std::string data, out;
  int digit = -1;
  TrainConfig config;
  bool early_stop = false;
};

void cmd_train(const TrainArgs& a, const std::vector<std::string>& argv) {
  Manifest man("train", argv, a.out);
  std::string data_path = resolve_input(a.data);
  man.input(data_path);
  man.config("digit", a.digit);
  man.config("bond_dim", a.config.bond_cap);
  man.config("eta", a.config.eta);
  man.config("epochs", a.config.max_epochs);
  man.config("batch_size", a.config.batch_size);
  man.config("early_stop", a.early_stop);
  man.config("svd_cutoff", a.config.svd_cutoff);
  man.config("plateau", {a.config.plateau_lo, a.config.plateau_hi});
  man.seed(a.config.seed);

  Dataset data = load_data(data_path, a.digit);
  TrainConfig cfg = a.config;
  cfg.early_stop = a.early_stop;

  QualityMonitor monitor = nullptr;
  Dataset fit_set = data;
  if (a.early_stop) {
    // hold out a slice and monitor its likelihood
    auto [tr, held] = split(data, 0.9, cfg.seed);
    if (held.empty()) throw InputError("train: dataset too small to hold out");
    fit_set = std::move(tr);
    Dataset held_set = std::move(held);
    int n = data.images[0].n_pixels();
    monitor = [held_set = std::move(held_set), n](const Mps& m) {
      double nll = nll_loss(m, held_set);
      return std::isfinite(nll) ? std::exp(-nll / n) : 0.0;
    };
  }

  Mps model = initial_model(data.images[0].n_pixels(), cfg);
  TrainResult result = train(std::move(model), fit_set, cfg, monitor);

  result.model.save_file(man.out_path("model.mpsw").string());
  man.output("model.mpsw");
  std::ofstream trace(man.out_path("trace.csv"));
  trace << "epoch,loss,e0,class_quality,entropy_plateau\n";
  for (const auto& r : result.trace.epochs)
    trace << r.epoch << "," << fmt(r.mean_loss) << "," << fmt(r.e0_train) << ","
          << fmt(r.quality) << "," << fmt(r.plateau_entropy) << "\n";
  trace.close();
  man.output("trace.csv");
  man.write();
}

struct SampleArgs {
  std::string model, out, clamp_file;
  long count = 1;
  std::uint64_t seed = 0;
  std::vector<double> e_window;
  bool text = false;
};

void cmd_sample(const SampleArgs& a, const std::vector<std::string>& argv) {
  Manifest man("sample", argv, a.out);
  std::string model_path = resolve_input(a.model);
  man.input(model_path);
  man.config("count", a.count);
  man.seed(a.seed);

  Mps model = load_model(model_path);
  SampleRequest req;
  req.count = a.count;
  req.seed = a.seed;
  if (!a.clamp_file.empty()) {
    std::string clamp_path = resolve_input(a.clamp_file);
    man.input(clamp_path);
    std::ifstream in(clamp_path);
    if (!in) throw ParseError("cannot open clamp file: " + clamp_path);
    int site, bit;
    while (in >> site >> bit) req.clamped.emplace_back(site, bit);
    man.config("n_clamped", req.clamped.size());
  }
  if (!a.e_window.empty()) {
    if (a.e_window.size() != 2)
      throw InputError("--e-window takes exactly two values: LO HI");
    req.energy_window = {{a.e_window[0], a.e_window[1]}};
    man.config("e_window", a.e_window);
  }
  // keep a square shape when the site count is a perfect square
  int n = model.n_sites();
  int side = static_cast<int>(std::lround(std::sqrt(double(n))));
  if (side * side == n) {
    req.height = side;
    req.width = side;
  }

  SampleBatch batch = sample_batch(model, req);
  save_dataset_file(batch.set, man.out_path("samples.bin").string());
  man.output("samples.bin");
  std::ofstream csv(man.out_path("energies.csv"));
  csv << "index,energy\n";
  for (size_t i = 0; i < batch.energies.size(); ++i)
    csv << i << "," << fmt(batch.energies[i]) << "\n";
  csv.close();
  man.output("energies.csv");
  if (a.text) {
    std::ofstream txt(man.out_path("samples.txt"));
    for (const auto& im : batch.set.images) txt << render_text(im) << "\n";
    txt.close();
    man.output("samples.txt");
  }
  man.write();
}

struct AnalyzeArgs {
  std::string model, data, ensemble, out;
  std::string tag = "train";
  std::string k_schedule, e_grid;
  double delta_e = 0.0;
  long pair_budget = 100000;
  std::uint64_t seed = 0;
  int plateau_lo = 200, plateau_hi = 600;
  int label = -1;
  int samples_per_bin = 100;
  double window = 0.0;
};

void analyze_energy(const AnalyzeArgs& a, Manifest& man) {
  Mps model = load_model(resolve_input(a.model));
  Dataset data = load_data(resolve_input(a.data), -1);
  auto stats = energy_stats(model, data, a.tag);
  json report{{"set_tag", stats.set_tag},
              {"n", stats.energies.size()},
              {"n_infinite", stats.n_infinite},
              {"e0", stats.e0},
              {"e_ground", stats.e_ground},
              {"mean_e", stats.mean_e},
              {"v_bits", stats.e0 / std::numbers::ln2}};
  write_json_report(man.out_path("report.json"), report);
  man.output("report.json");

  std::vector<double> finite;
  for (double e : stats.energies)
    if (std::isfinite(e)) finite.push_back(e);
  if (finite.size() >= 2) {
    Kde kde(finite);
    double lo = *std::min_element(finite.begin(), finite.end());
    double hi = *std::max_element(finite.begin(), finite.end());
    lo -= 3 * kde.bandwidth();
    hi += 3 * kde.bandwidth();
    std::ofstream csv(man.out_path("density.csv"));
    csv << "energy,density\n";
    const int grid = 200;
    for (int i = 0; i < grid; ++i) {
      double e = lo + (hi - lo) * i / (grid - 1);
      csv << fmt(e) << "," << fmt(kde(e)) << "\n";
    }
    csv.close();
    man.output("density.csv");
  }
}

void analyze_size(const AnalyzeArgs& a, Manifest& man) {
  Mps model = load_model(resolve_input(a.model));
  Dataset data = load_data(resolve_input(a.data), -1);
  auto stats = energy_stats(model, data, a.tag);
  std::vector<double> finite;
  for (double e : stats.energies)
    if (std::isfinite(e)) finite.push_back(e);
  if (finite.size() < 2)
    throw NumericError("size: fewer than 2 finite energies");
  Kde kde(finite);
  double delta_e = a.delta_e > 0.0 ? a.delta_e : kde.bandwidth();
  auto size = full_set_size(stats.e0, kde(stats.e0), delta_e);
  json report{{"e0", stats.e0},
              {"v_bits", size.v},
              {"ln_nf", size.ln_nf},
              {"log2_nf", size.ln_nf / std::numbers::ln2},
              {"rho_at_e0", kde(stats.e0)},
              {"delta_e", delta_e},
              {"kde_bandwidth", kde.bandwidth()},
              {"n", finite.size()}};
  write_json_report(man.out_path("report.json"), report);
  man.output("report.json");
}

void analyze_hamming(const AnalyzeArgs& a, Manifest& man) {
  Dataset data = load_data(resolve_input(a.data), -1);
  auto stats = hamming_stats(data, a.pair_budget, a.seed);
  json report{{"mean_pairwise", stats.mean_pairwise},
              {"std_pairwise", stats.std_pairwise},
              {"mean_black_pixels", stats.mean_black_pixels},
              {"random_baseline", stats.random_baseline},
              {"n_pairs", stats.n_pairs}};
  write_json_report(man.out_path("report.json"), report);
  man.output("report.json");
}

void analyze_fractal(const AnalyzeArgs& a, Manifest& man) {
  Dataset data = load_data(resolve_input(a.data), -1);
  if (a.k_schedule.empty()) throw InputError("fractal: --k-schedule is required");
  auto fit = fractal_dimension(data, parse_long_list(a.k_schedule), a.seed);
  json report{{"k_values", fit.k_values},
              {"d_values", fit.d_values},
              {"slope", fit.slope},
              {"delta", fit.delta},
              {"fit_r2", fit.fit_r2}};
  write_json_report(man.out_path("report.json"), report);
  man.output("report.json");
  std::ofstream csv(man.out_path("fractal.csv"));
  csv << "k,d,log_k,log_d\n";
  for (size_t i = 0; i < fit.k_values.size(); ++i)
    csv << fit.k_values[i] << "," << fmt(fit.d_values[i]) << ","
        << fmt(std::log(double(fit.k_values[i]))) << ","
        << fmt(std::log(fit.d_values[i])) << "\n";
  csv.close();
  man.output("fractal.csv");
}

void analyze_page(const AnalyzeArgs& a, Manifest& man) {
  Mps model = load_model(resolve_input(a.model));
  auto pc = page_curve(model, a.plateau_lo, a.plateau_hi);
  json report{{"plateau_lo", pc.plateau_lo},
              {"plateau_hi", pc.plateau_hi},
              {"s_bar", pc.s_bar}};
  write_json_report(man.out_path("report.json"), report);
  man.output("report.json");
  std::ofstream csv(man.out_path("page.csv"));
  csv << "k,s_k\n";
  for (size_t k = 1; k <= pc.s_k.size(); ++k)
    csv << k << "," << fmt(pc.s_k[k - 1]) << "\n";
  csv.close();
  man.output("page.csv");
}

void analyze_neat_threshold(const AnalyzeArgs& a, Manifest& man) {
  Mps model = load_model(resolve_input(a.model));
  if (a.ensemble.empty() || a.label < 0)
    throw InputError("neat-threshold: --ensemble and --label are required");
  if (a.e_grid.empty()) throw InputError("neat-threshold: --e-grid is required");
  auto ensemble = ClassifierEnsemble::load_dir(resolve_input(a.ensemble));
  auto oracle = ensemble_oracle(ensemble, a.label);
  auto result = neat_threshold(model, oracle, parse_double_list(a.e_grid),
                               a.samples_per_bin, a.seed, a.window);
  json report{{"epsilon_star", result.epsilon_star},
              {"e_grid", result.profile.e_grid},
              {"mean_quality", result.profile.mean_quality},
              {"std_quality", result.profile.std_quality}};
  write_json_report(man.out_path("report.json"), report);
  man.output("report.json");
  std::ofstream csv(man.out_path("profile.csv"));
  csv << "energy,mean_quality,std_quality\n";
  for (size_t i = 0; i < result.profile.e_grid.size(); ++i)
    csv << fmt(result.profile.e_grid[i]) << ","
        << fmt(result.profile.mean_quality[i]) << ","
        << fmt(result.profile.std_quality[i]) << "\n";
  csv.close();
  man.output("profile.csv");
}

struct ClassifyArgs {
  std::string ensemble, data, out;
};

void cmd_classify(const ClassifyArgs& a, const std::vector<std::string>& argv) {
  Manifest man("classify", argv, a.out);
  std::string data_path = resolve_input(a.data);
  man.input(data_path);
  auto ensemble = ClassifierEnsemble::load_dir(resolve_input(a.ensemble));
  Dataset test = load_data(data_path, -1);
  long correct = 0, unclassified = 0;
  std::map<std::string, std::array<long, 2>> per_label;  // label -> {correct, total}
  for (const auto& im : test.images) {
    auto got = classify(ensemble, im);
    if (!got) ++unclassified;
    bool ok = got && *got == im.label;
    if (ok) ++correct;
    auto& slot = per_label[std::to_string(im.label)];
    slot[0] += ok;
    slot[1] += 1;
  }
  json per = json::object();
  for (const auto& [label, c] : per_label)
    per[label] = {{"correct", c[0]}, {"total", c[1]}};
  json report{{"accuracy", double(correct) / double(test.size())},
              {"n", test.size()},
              {"n_unclassified", unclassified},
              {"per_label", per}};
  write_json_report(man.out_path("report.json"), report);
  man.output("report.json");
  man.write();
}

struct DiscriminateArgs {
  std::string model, pos, neg, out;
  double epsilon = 0.0;  // probability-scale; 0 = calibrate
};

void cmd_discriminate(const DiscriminateArgs& a,
                      const std::vector<std::string>& argv) {
  Manifest man("discriminate", argv, a.out);
  std::string pos_path = resolve_input(a.pos);
  std::string neg_path = resolve_input(a.neg);
  std::string model_path = resolve_input(a.model);
  man.input(model_path);
  man.input(pos_path);
  man.input(neg_path);
  Mps model = load_model(model_path);
  Dataset pos = load_data(pos_path, -1);
  Dataset neg = load_data(neg_path, -1);
  DiscriminationReport r =
      a.epsilon > 0.0
          ? evaluate_threshold(model, std::log(a.epsilon), pos, neg)
          : calibrate_threshold(model, pos, neg);
  json report{{"log_epsilon", r.log_threshold},
              {"epsilon", std::exp(r.log_threshold)},
              {"balanced_accuracy", r.balanced_accuracy},
              {"tp", r.tp},
              {"fn", r.fn},
              {"tn", r.tn},
              {"fp", r.fp},
              {"calibrated", a.epsilon <= 0.0}};
  write_json_report(man.out_path("report.json"), report);
  man.output("report.json");
  man.write();
}

struct Table1Args {
  std::string data, out;
  std::string digits = "0,1";
  std::string bond_dims = "30";
  int n_seeds = 1;
  std::uint64_t base_seed = 0;
  int epochs = 5;
  int batch_size = 0;
  long sample_count = 500;
  std::string k_schedule;
  int plateau_lo = 200, plateau_hi = 600;
};

void cmd_table1(const Table1Args& a, const std::vector<std::string>& argv) {
  Manifest man("reproduce-table1", argv, a.out);
  std::string data_path = resolve_input(a.data);
  man.input(data_path);
  man.config("digits", a.digits);
  man.config("bond_dims", a.bond_dims);
  man.config("n_seeds", a.n_seeds);
  man.config("epochs", a.epochs);
  man.config("sample_count", a.sample_count);
  man.seed(a.base_seed);

  Dataset all = load_dataset_file(data_path);
  std::vector<long> digits = parse_long_list(a.digits);
  std::vector<long> bond_dims = parse_long_list(a.bond_dims);
  std::vector<long> k_schedule;
  if (!a.k_schedule.empty()) {
    k_schedule = parse_long_list(a.k_schedule);
  } else {
    for (long k = a.sample_count / 8; k <= a.sample_count; k *= 2)
      k_schedule.push_back(k);
  }

  std::ofstream csv(man.out_path("table1.csv"));
  csv << "digit,bond_dim,seed,v,d_ab,delta,n,s_bar\n";
  json rows = json::array();
  std::map<long, std::vector<json>> by_digit;
  for (long digit : digits) {
    Dataset subset = all.filter_label(static_cast<int>(digit));
    if (subset.empty())
      throw InputError("no images with label " + std::to_string(digit));
    double black = 0;
    for (const auto& im : subset.images) black += im.count_ones();
    double n_pixels = black / static_cast<double>(subset.size());
    for (long bond : bond_dims)
      for (int s = 0; s < a.n_seeds; ++s) {
        TrainConfig cfg;
        cfg.bond_cap = static_cast<int>(bond);
        cfg.max_epochs = a.epochs;
        cfg.batch_size = a.batch_size;
        cfg.seed = mix_seed(a.base_seed, (digit * 97 + bond) * 131 + s);
        cfg.plateau_lo = a.plateau_lo;
        cfg.plateau_hi = a.plateau_hi;
        cfg.trace_entropy = false;
        Mps model = initial_model(subset.images[0].n_pixels(), cfg);
        TrainResult result = train(std::move(model), subset, cfg);

        SampleRequest req;
        req.count = a.sample_count;
        req.seed = mix_seed(cfg.seed, 1);
        SampleBatch batch = sample_batch(result.model, req);
        double e0 = soft_min_energy(batch.energies);
        double v = e0 / std::numbers::ln2;
        auto ham = hamming_stats(batch.set, 100000, cfg.seed);
        double delta = std::nan("");
        try {
          delta = fractal_dimension(batch.set, k_schedule, cfg.seed).delta;
        } catch (const NumericError&) {
          // duplicate-dominated sample set at small scale: no scaling fit
        }
        auto pc = page_curve(result.model, a.plateau_lo, a.plateau_hi);

        csv << digit << "," << bond << "," << s << "," << fmt(v) << ","
            << fmt(ham.mean_pairwise) << "," << fmt(delta) << ","
            << fmt(n_pixels) << "," << fmt(pc.s_bar) << "\n";
        json row{{"digit", digit},       {"bond_dim", bond},
                 {"seed", s},            {"v", v},
                 {"d_ab", ham.mean_pairwise},
                 {"delta", std::isfinite(delta) ? json(delta) : json()},
                 {"n", n_pixels},        {"s_bar", pc.s_bar}};
        rows.push_back(row);
        by_digit[digit].push_back(row);
      }
  }
  csv.close();
  man.output("table1.csv");

  // per-digit mean and spread across bond dimensions x seeds
  json summary = json::object();
  for (const auto& [digit, drows] : by_digit) {
    auto agg = [&](const char* key) {
      double mean = 0, n = 0;
      for (const auto& r : drows)
        if (!r.at(key).is_null()) {
          mean += r.at(key).get<double>();
          n += 1;
        }
      if (n == 0) return json();
      mean /= n;
      double var = 0;
      for (const auto& r : drows)
        if (!r.at(key).is_null()) {
          double d = r.at(key).get<double>() - mean;
          var += d * d;
        }
      return json{{"mean", mean}, {"spread", std::sqrt(var / n)}};
    };
    summary[std::to_string(digit)] = {{"v", agg("v")},
                                      {"d_ab", agg("d_ab")},
                                      {"delta", agg("delta")},
                                      {"n", agg("n")},
                                      {"s_bar", agg("s_bar")}};
  }
  write_json_report(man.out_path("table1.json"),
                    json{{"rows", rows}, {"summary", summary}});
  man.output("table1.json");
  man.write();
}

void cmd_rerun(const std::string& manifest_path, const std::string& out) {
  std::ifstream in(resolve_input(manifest_path));
  if (!in) throw ParseError("cannot open manifest: " + manifest_path);
  json m;
  try {
    m = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad manifest: ") + e.what());
  }
  if (!m.contains("argv") || !m["argv"].is_array())
    throw ParseError("manifest has no argv record");
  std::vector<std::string> argv = m["argv"].get<std::vector<std::string>>();
  for (size_t i = 0; i + 1 < argv.size(); ++i)
    if (argv[i] == "--out") argv[i + 1] = out;
  int code = run(argv);
  if (code != 0) throw InfeasibleError("rerun: replayed command failed");
}

// ------------------------------------------------------------------ parser

int run(const std::vector<std::string>& args) {
  CLI::App app{"MPS Born machines over binary images: training, sampling, "
               "classification, and full-set analysis"};
  app.set_version_flag("--version", kVersion);
  app.set_config("--config");
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "cap worker threads (0 = default)");

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "IDX images to binarized dataset");
  c_ingest->add_option("--images", ingest.images, "IDX image file (gzip ok)")
      ->required();
  c_ingest->add_option("--labels", ingest.labels, "IDX label file (gzip ok)");
  c_ingest->add_option("--threshold", ingest.threshold, "binarization threshold")
      ->check(CLI::Range(0, 255));
  c_ingest->add_option("--split-fraction", ingest.split_fraction,
                       "train fraction; 0 = no split")
      ->check(CLI::Range(0.0, 1.0));
  c_ingest->add_option("--seed", ingest.seed, "split shuffle seed");
  c_ingest->add_option("--digit", ingest.digit, "keep only this label");
  c_ingest->add_option("--out", ingest.out, "output directory")->required();

  TrainArgs train_args;
  auto* c_train = app.add_subcommand("train", "fit one model by DMRG sweeps");
  c_train->add_option("--data", train_args.data, "dataset container")->required();
  c_train->add_option("--digit", train_args.digit, "train on this label only");
  c_train->add_option("--bond-dim", train_args.config.bond_cap, "bond cap D");
  c_train->add_option("--eta", train_args.config.eta, "rotation angle (rad)");
  c_train->add_option("--epochs", train_args.config.max_epochs, "sweep pairs");
  c_train->add_option("--batch-size", train_args.config.batch_size,
                      "minibatch size; 0 = full");
  c_train->add_option("--seed", train_args.config.seed, "init + shuffle seed");
  c_train->add_flag("--early-stop", train_args.early_stop,
                    "return the best held-out-likelihood snapshot");
  c_train->add_option("--svd-cutoff", train_args.config.svd_cutoff,
                      "relative singular-value cutoff");
  c_train->add_option("--plateau-lo", train_args.config.plateau_lo,
                      "entropy plateau lower cut");
  c_train->add_option("--plateau-hi", train_args.config.plateau_hi,
                      "entropy plateau upper cut");
  c_train->add_option("--out", train_args.out, "output directory")->required();

  SampleArgs sample_args;
  auto* c_sample = app.add_subcommand("sample", "draw exact Born samples");
  c_sample->add_option("--model", sample_args.model, "model file")->required();
  c_sample->add_option("--count", sample_args.count, "number of samples");
  c_sample->add_option("--seed", sample_args.seed, "sampling seed");
  c_sample->add_option("--clamp", sample_args.clamp_file,
                       "clamp file: one 'site bit' pair per line");
  c_sample->add_option("--e-window", sample_args.e_window,
                       "energy window LO HI (rejection)")
      ->expected(2);
  c_sample->add_flag("--text", sample_args.text, "also write text grids");
  c_sample->add_option("--out", sample_args.out, "output directory")->required();

  AnalyzeArgs an;
  auto* c_an = app.add_subcommand("analyze", "full-set characteristics");
  c_an->require_subcommand(1);
  std::vector<std::pair<std::string, void (*)(const AnalyzeArgs&, Manifest&)>>
      an_modes{{"energy", analyze_energy},
               {"size", analyze_size},
               {"hamming", analyze_hamming},
               {"fractal", analyze_fractal},
               {"page", analyze_page},
               {"neat-threshold", analyze_neat_threshold}};
  for (auto& [name, fn] : an_modes) {
    auto* sub = c_an->add_subcommand(name);
    sub->add_option("--model", an.model, "model file");
    sub->add_option("--data", an.data, "dataset container");
    sub->add_option("--tag", an.tag, "set tag for the report");
    sub->add_option("--seed", an.seed, "seed");
    sub->add_option("--out", an.out, "output directory")->required();
    if (name == "size")
      sub->add_option("--delta-e", an.delta_e,
                      "energy window width; 0 = KDE bandwidth");
    if (name == "hamming")
      sub->add_option("--pair-budget", an.pair_budget, "max sampled pairs");
    if (name == "fractal")
      sub->add_option("--k-schedule", an.k_schedule,
                      "comma-separated subsample sizes");
    if (name == "page") {
      sub->add_option("--plateau-lo", an.plateau_lo, "plateau lower cut");
      sub->add_option("--plateau-hi", an.plateau_hi, "plateau upper cut");
    }
    if (name == "neat-threshold") {
      sub->add_option("--ensemble", an.ensemble, "ensemble directory (oracle)");
      sub->add_option("--label", an.label, "oracle label");
      sub->add_option("--e-grid", an.e_grid, "comma-separated energy grid");
      sub->add_option("--samples-per-bin", an.samples_per_bin,
                      "samples per grid energy");
      sub->add_option("--window", an.window,
                      "energy window half-width; 0 = half grid spacing");
    }
  }

  ClassifyArgs cl;
  auto* c_cl = app.add_subcommand("classify", "argmax ensemble classification");
  c_cl->add_option("--ensemble", cl.ensemble, "ensemble directory")->required();
  c_cl->add_option("--data", cl.data, "labeled dataset container")->required();
  c_cl->add_option("--out", cl.out, "output directory")->required();

  DiscriminateArgs di;
  auto* c_di = app.add_subcommand("discriminate",
                                  "single-model threshold discrimination");
  c_di->add_option("--model", di.model, "model file")->required();
  c_di->add_option("--pos", di.pos, "positive dataset")->required();
  c_di->add_option("--neg", di.neg, "negative dataset")->required();
  c_di->add_option("--epsilon", di.epsilon,
                   "fixed probability threshold; 0 = calibrate");
  c_di->add_option("--out", di.out, "output directory")->required();

  Table1Args t1;
  auto* c_t1 = app.add_subcommand("reproduce-table1",
                                  "per-digit full-set summary table");
  c_t1->add_option("--data", t1.data, "labeled dataset container")->required();
  c_t1->add_option("--digits", t1.digits, "comma-separated digit list");
  c_t1->add_option("--bond-dims", t1.bond_dims, "comma-separated bond caps");
  c_t1->add_option("--seeds", t1.n_seeds, "number of seeds per setting");
  c_t1->add_option("--seed", t1.base_seed, "base seed");
  c_t1->add_option("--epochs", t1.epochs, "training epochs");
  c_t1->add_option("--batch-size", t1.batch_size, "minibatch size; 0 = full");
  c_t1->add_option("--sample-count", t1.sample_count, "samples per model");
  c_t1->add_option("--k-schedule", t1.k_schedule,
                   "fractal subsample sizes; default from sample count");
  c_t1->add_option("--plateau-lo", t1.plateau_lo, "plateau lower cut");
  c_t1->add_option("--plateau-hi", t1.plateau_hi, "plateau upper cut");
  c_t1->add_option("--out", t1.out, "output directory")->required();

  std::string rerun_manifest, rerun_out;
  auto* c_re = app.add_subcommand("rerun", "replay a command from its manifest");
  c_re->add_option("--manifest", rerun_manifest, "manifest.json path")->required();
  c_re->add_option("--out", rerun_out, "new output directory")->required();

  try {
    // CLI11 parses argv-style right to left
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::CallForVersion& e) {
    std::cout << kVersion << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  if (threads > 0) Eigen::setNbThreads(threads);

  std::vector<std::string> argv_record;
  argv_record.reserve(args.size());
  for (const auto& s : args) argv_record.push_back(s);

  if (c_ingest->parsed()) cmd_ingest(ingest, argv_record);
  else if (c_train->parsed()) cmd_train(train_args, argv_record);
  else if (c_sample->parsed()) cmd_sample(sample_args, argv_record);
  else if (c_an->parsed()) {
    for (auto& [name, fn] : an_modes) {
      auto* sub = c_an->get_subcommand(name);
      if (sub->parsed()) {
        Manifest man("analyze " + name, argv_record, an.out);
        fn(an, man);
        man.write();
      }
    }
  } else if (c_cl->parsed()) cmd_classify(cl, argv_record);
  else if (c_di->parsed()) cmd_discriminate(di, argv_record);
  else if (c_t1->parsed()) cmd_table1(t1, argv_record);
  else if (c_re->parsed()) cmd_rerun(rerun_manifest, rerun_out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    return run(args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
}
