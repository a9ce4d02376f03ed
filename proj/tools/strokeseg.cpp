// Batch front end: preprocessing, autoencoder training, reconstructions,
// segmentation training/evaluation, rendering and manifest replay.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "manifest.hpp"
#include "strokeseg/config.hpp"
#include "strokeseg/model_io.hpp"
#include "strokeseg/pipeline.hpp"
#include "strokeseg/render.hpp"
#include "strokeseg/synthetic.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace strokeseg;
using strokeseg::cli::RunManifest;

namespace {

std::vector<Sketch> load_sketches(const fs::path& path) {
  std::istringstream in(cli::read_file(path));
  return parse_sketches(in);
}

std::string sketches_text(std::span<const Sketch> sketches) {
  std::ostringstream out;
  write_sketches(out, sketches);
  return out.str();
}

std::string rng_state(const Rng& rng) {
  std::ostringstream s;
  s << rng;
  return s.str();
}

Rng rng_from_state(const std::string& state) {
  Rng rng;
  std::istringstream s(state);
  s >> rng;
  if (!s) throw std::runtime_error("corrupt random state in checkpoint");
  return rng;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

LoadedVae<double> read_vae(const fs::path& path) {
  std::istringstream in(cli::read_file(path));
  return load_vae<double>(in);
}

std::string most_common_category(std::span<const Sketch> sketches) {
  std::map<std::string, std::size_t> counts;
  for (const auto& s : sketches) ++counts[s.category];
  std::string best;
  std::size_t n = 0;
  for (const auto& [c, k] : counts)
    if (k > n) {
      best = c;
      n = k;
    }
  return best;
}

std::vector<Sketch> of_category(std::span<const Sketch> sketches, const std::string& category) {
  std::vector<Sketch> out;
  for (const auto& s : sketches)
    if (s.category == category) out.push_back(s);
  return out;
}

/// Categories to segment: the requested one, or every labelled category present.
std::vector<std::string> segmentation_categories(std::span<const Sketch> sketches, const std::string& requested) {
  if (!requested.empty()) {
    if (category_labels(requested).empty()) throw std::invalid_argument("no label set for category '" + requested + "'");
    return {requested};
  }
  std::vector<std::string> out;
  for (const auto& s : sketches) {
    if (!s.labeled()) throw std::invalid_argument("segmentation data must be fully labelled");
    if (std::find(out.begin(), out.end(), s.category) == out.end()) out.push_back(s.category);
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct Common {
  std::uint64_t seed = 0;
  std::string manifest;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  cmd->add_option("--manifest", c.manifest, "Where to write the run manifest");
}

fs::path manifest_path(const Common& c, const fs::path& fallback) {
  return c.manifest.empty() ? fallback : fs::path(c.manifest);
}

// ---------------------------------------------------------------------------

struct PreprocessArgs {
  std::string input, output;
  PreprocessOptions options;
};

void run_preprocess(const PreprocessArgs& a, const Common& c, RunManifest& m) {
  const fs::path in = cli::resolve_input(a.input);
  m.add_input(in);
  m.config() = {{"spacing", a.options.spacing}, {"epsilon", a.options.epsilon}, {"min_length", a.options.min_length}};
  const auto raw = load_sketches(in);
  std::vector<Sketch> out;
  std::size_t dropped = 0;
  for (const auto& s : raw) {
    Sketch p = preprocess_sketch(s, a.options);
    if (p.strokes.empty()) ++dropped;
    else out.push_back(std::move(p));
  }
  m.notes() = {{"sketches_in", raw.size()}, {"sketches_out", out.size()}, {"dropped", dropped}};
  m.write_output(a.output, sketches_text(out));
  m.finish(manifest_path(c, a.output + ".manifest.json"));
  std::cout << "preprocessed " << out.size() << " sketches (" << dropped << " dropped)\n";
}

struct SynthArgs {
  std::string category = "chair", output;
  std::size_t count = 100;
};

void run_synth(const SynthArgs& a, const Common& c, RunManifest& m) {
  m.set_seed(c.seed);
  m.config() = {{"category", a.category}, {"count", a.count}};
  Rng rng(c.seed);
  m.write_output(a.output, sketches_text(synth_sketches(a.category, a.count, rng)));
  m.finish(manifest_path(c, a.output + ".manifest.json"));
  std::cout << "wrote " << a.count << " synthetic " << a.category << " sketches\n";
}

struct TrainVaeArgs {
  std::string data, output_dir, config, resume, category;
  int epochs = 10;
  bool no_augment = false;
};

void run_train_vae(const TrainVaeArgs& a, const Common& c, RunManifest& m) {
  const fs::path data_path = cli::resolve_input(a.data);
  m.add_input(data_path);
  m.set_seed(c.seed);
  const auto data = load_sketches(data_path);
  if (data.empty()) throw std::invalid_argument("no training sketches in " + data_path.string());

  VaeModel<double> model;
  OptimizerState<double> state;
  Rng rng(c.seed);
  std::string category = a.category.empty() ? most_common_category(data) : a.category;
  if (!a.resume.empty()) {
    if (!a.config.empty()) throw std::invalid_argument("--config cannot be combined with --resume");
    const fs::path ck = cli::resolve_input(a.resume);
    m.add_input(ck);
    auto loaded = read_vae(ck);
    model = std::move(loaded.model);
    state = std::move(loaded.optimizer);
    if (loaded.header.contains("rng")) rng = rng_from_state(loaded.header["rng"].get<std::string>());
    if (a.category.empty()) category = loaded.header.value("category", category);
  } else {
    VaeConfig cfg;
    if (!a.config.empty()) {
      const fs::path cp = cli::resolve_input(a.config);
      m.add_input(cp);
      cfg = load_vae_config(cli::read_file(cp));
    }
    if (cfg.max_len == 0) cfg.max_len = stroke_length_quantile(data, 0.99);
    model = VaeModel<double>::init(cfg, rng);
  }
  m.config() = model.config;
  m.notes()["category"] = category;

  const fs::path dir(a.output_dir);
  const fs::path ckpt = dir / "vae.ckpt";
  auto save = [&](const VaeModel<double>& mdl, const OptimizerState<double>& st) {
    std::ostringstream out;
    save_vae(out, mdl, &st, {{"category", category}, {"rng", rng_state(rng)}});
    m.write_output(ckpt, out.str());
  };
  save(model, state);

  TrainOptions<double> opt;
  opt.epochs = a.epochs;
  opt.augment = !a.no_augment;
  opt.on_epoch = [&](int epoch, const VaeModel<double>& mdl, const OptimizerState<double>& st) {
    save(mdl, st);
    std::cerr << "epoch " << epoch << " step " << st.step << "\n";
  };
  std::vector<StepRecord> history;
  if (a.epochs > 0) history = train(model, state, std::span<const Sketch>(data), opt, rng);

  std::string csv = "step,epoch,reconstruction,pen,kl,kl_weight,total\n";
  for (const auto& r : history)
    csv += std::to_string(r.step) + "," + std::to_string(r.epoch) + "," + fmt(r.reconstruction) + "," + fmt(r.pen) +
           "," + fmt(r.kl) + "," + fmt(r.kl_weight) + "," + fmt(r.total) + "\n";
  m.write_output(dir / "loss.csv", csv);

  const LossBreakdown eval = evaluate(model, std::span<const Sketch>(data), state.step);
  const json report = {{"steps", state.step},
                       {"category", category},
                       {"reconstruction", eval.reconstruction},
                       {"pen", eval.pen},
                       {"kl", eval.kl},
                       {"kl_weight", eval.kl_weight},
                       {"total", eval.total},
                       {"pen_accuracy", eval.pen_accuracy()}};
  m.write_output(dir / "train_report.json", report.dump(2) + "\n");
  m.finish(manifest_path(c, dir / "manifest.json"));
  std::cout << "trained to step " << state.step << ", loss " << eval.total << "\n";
}

struct ReconstructArgs {
  std::string checkpoint, input, output_dir;
  std::vector<double> tau = {0.01, 0.5, 1.0};
  std::size_t limit = 0;
  bool mean_latent = false;
};

void run_reconstruct(const ReconstructArgs& a, const Common& c, RunManifest& m) {
  const fs::path ck = cli::resolve_input(a.checkpoint), in = cli::resolve_input(a.input);
  m.add_input(ck);
  m.add_input(in);
  m.set_seed(c.seed);
  m.config() = {{"tau", a.tau}, {"limit", a.limit}, {"mean_latent", a.mean_latent}};
  const auto vae = read_vae(ck);
  auto sketches = load_sketches(in);
  if (a.limit > 0 && sketches.size() > a.limit) sketches.resize(a.limit);
  std::vector<std::string> titles = {"input"};
  for (double t : a.tau) titles.push_back("tau " + fmt(t));
  Rng rng(c.seed);
  const LatentMode mode = a.mean_latent ? LatentMode::Mean : LatentMode::Sample;
  for (std::size_t i = 0; i < sketches.size(); ++i) {
    std::vector<Sketch> row = {sketches[i]};
    for (double t : a.tau) row.push_back(reconstruct_sketch(vae.model, sketches[i], t, rng, mode));
    char name[32];
    std::snprintf(name, sizeof name, "recon_%04zu.svg", i);
    m.write_output(fs::path(a.output_dir) / name, render_grid({row}, {}, titles));
  }
  m.finish(manifest_path(c, fs::path(a.output_dir) / "manifest.json"));
  std::cout << "wrote " << sketches.size() << " reconstruction grids\n";
}

struct SegArgs {
  std::string data, encoder, category, seg_config, output;
  std::vector<std::string> features = {"nn"};
  int folds = 5;
  std::vector<std::size_t> train_sizes;
  std::string dump_features;
};

struct SegInputs {
  std::vector<Sketch> data;
  std::optional<LoadedVae<double>> encoder;
  std::string encoder_sha;
  SegConfig config;
};

SegInputs load_seg_inputs(const SegArgs& a, RunManifest& m) {
  SegInputs s;
  const fs::path in = cli::resolve_input(a.data);
  m.add_input(in);
  s.data = load_sketches(in);
  bool needs_encoder = false;
  for (const auto& f : a.features) needs_encoder |= parse_variant(f) == FeatureVariant::Encoder;
  if (needs_encoder) {
    if (a.encoder.empty()) throw std::invalid_argument("the nn feature needs --encoder");
    const fs::path ck = cli::resolve_input(a.encoder);
    m.add_input(ck);
    s.encoder_sha = cli::file_sha256(ck);
    s.encoder = read_vae(ck);
  }
  if (!a.seg_config.empty()) {
    const fs::path cp = cli::resolve_input(a.seg_config);
    m.add_input(cp);
    s.config = load_seg_config(cli::read_file(cp));
  }
  m.config() = s.config;
  return s;
}

json encoder_info(const SegInputs& s) {
  if (!s.encoder) return nullptr;
  return {{"category", s.encoder->header.value("category", std::string{})},
          {"sha256", s.encoder_sha},
          {"enc_hidden", s.encoder->model.config.enc_hidden}};
}

void run_train_seg(const SegArgs& a, const Common& c, RunManifest& m) {
  if (a.features.size() != 1) throw std::invalid_argument("train-seg takes exactly one --feature");
  m.set_seed(c.seed);
  const SegInputs in = load_seg_inputs(a, m);
  const auto cats = segmentation_categories(in.data, a.category);
  if (cats.size() != 1) throw std::invalid_argument("data holds several categories; pick one with --category");
  const auto sketches = of_category(in.data, cats[0]);
  if (sketches.empty()) throw std::invalid_argument("no sketches of category " + cats[0]);
  const FeatureVariant variant = parse_variant(a.features[0]);
  const auto& classes = category_labels(cats[0]);
  const auto symbols = labeled_symbols(sketches, classes, variant, in.encoder ? &in.encoder->model : nullptr);

  Eigen::MatrixXd x(symbols.front().features.rows(), 0);
  std::vector<int> y;
  for (const auto& s : symbols) {
    x.conservativeResize(Eigen::NoChange, x.cols() + s.features.cols());
    x.rightCols(s.features.cols()) = s.features;
    y.insert(y.end(), s.labels.begin(), s.labels.end());
  }
  Rng rng(c.seed);
  const auto result = train_segmenter<double>(x, y, classes, in.config, rng);
  const double acc = evaluate_accuracy(predict<double>(result.model, x), y);

  const fs::path dir(a.output);
  std::ostringstream ck;
  save_segmenter(ck, result.model, {{"feature", a.features[0]}, {"category", cats[0]}, {"encoder", encoder_info(in)}});
  m.write_output(dir / "seg.ckpt", ck.str());
  json history = json::array();
  for (const auto& r : result.history)
    history.push_back({{"epoch", r.epoch},
                       {"train_loss", r.train_loss},
                       {"monitor_accuracy", r.monitor_accuracy},
                       {"monitor_loss", r.monitor_loss}});
  const json report = {{"category", cats[0]},
                       {"feature", a.features[0]},
                       {"classes", classes},
                       {"class_weights", std::vector<double>(result.weights.data(), result.weights.data() + result.weights.size())},
                       {"strokes", y.size()},
                       {"best_epoch", result.best_epoch},
                       {"train_accuracy", acc},
                       {"encoder", encoder_info(in)},
                       {"history", history}};
  m.write_output(dir / "train_report.json", report.dump(2) + "\n");
  m.finish(manifest_path(c, dir / "manifest.json"));
  std::cout << cats[0] << " " << a.features[0] << " training accuracy " << acc << "\n";
}

void run_eval_seg(const SegArgs& a, const Common& c, RunManifest& m) {
  m.set_seed(c.seed);
  const SegInputs in = load_seg_inputs(a, m);
  const auto cats = segmentation_categories(in.data, a.category);
  std::vector<std::size_t> sizes = a.train_sizes.empty() ? std::vector<std::size_t>{0} : a.train_sizes;
  std::string dump;

  json categories = json::object();
  std::map<std::string, std::vector<double>> per_feature;
  for (const auto& cat : cats) {
    const auto sketches = of_category(in.data, cat);
    const auto& classes = category_labels(cat);
    json features = json::object();
    for (const auto& fname : a.features) {
      const FeatureVariant variant = parse_variant(fname);
      const auto symbols = labeled_symbols(sketches, classes, variant, in.encoder ? &in.encoder->model : nullptr);
      if (!a.dump_features.empty())
        for (std::size_t i = 0; i < symbols.size(); ++i)
          for (Eigen::Index k = 0; k < symbols[i].features.cols(); ++k) {
            const Eigen::VectorXd v = symbols[i].features.col(k);
            dump += json{{"category", cat}, {"sketch", i}, {"stroke", k}, {"variant", fname},
                         {"label", classes[static_cast<std::size_t>(symbols[i].labels[static_cast<std::size_t>(k)])]},
                         {"values", std::vector<double>(v.data(), v.data() + v.size())}}
                        .dump() +
                    "\n";
          }
      json runs = json::array();
      for (std::size_t n : sizes) {
        // Same seed per run, so every feature sees the same folds.
        Rng rng(c.seed);
        const CvReport r = cross_validate(symbols, classes, a.folds, mlp_fold_trainer(classes, in.config), rng, n);
        json j = report_to_json(r);
        j["train_size"] = n == 0 ? json(nullptr) : json(n);
        runs.push_back(j);
        std::cout << cat << " " << fname << (n ? " n=" + std::to_string(n) : std::string()) << " accuracy "
                  << r.mean_accuracy << "\n";
        if (n == sizes.back()) per_feature[fname].push_back(r.mean_accuracy);
      }
      features[fname] = {{"runs", runs}};
    }
    categories[cat] = {{"sketches", sketches.size()}, {"features", features}};
  }
  json summary = json::object();
  for (const auto& [f, accs] : per_feature) {
    double s = 0.0;
    for (double v : accs) s += v;
    summary[f] = s / static_cast<double>(accs.size());
  }
  const json report = {{"folds", a.folds},          {"seed", c.seed},    {"encoder", encoder_info(in)},
                       {"categories", categories},  {"mean_accuracy", summary}};
  m.write_output(a.output, report.dump(2) + "\n");
  if (!a.dump_features.empty()) m.write_output(a.dump_features, dump);
  m.finish(manifest_path(c, a.output + ".manifest.json"));
}

struct PredictArgs {
  std::string segmenter, encoder, input, output;
};

void run_predict(const PredictArgs& a, const Common& c, RunManifest& m) {
  const fs::path sp = cli::resolve_input(a.segmenter), in = cli::resolve_input(a.input);
  m.add_input(sp);
  m.add_input(in);
  std::istringstream ss(cli::read_file(sp));
  const auto seg = load_segmenter<double>(ss);
  const FeatureVariant variant = parse_variant(seg.header.value("feature", std::string("nn")));
  const std::string category = seg.header.value("category", std::string{});
  std::optional<LoadedVae<double>> encoder;
  if (variant == FeatureVariant::Encoder) {
    if (a.encoder.empty()) throw std::invalid_argument("this segmenter needs --encoder");
    const fs::path ep = cli::resolve_input(a.encoder);
    m.add_input(ep);
    encoder = read_vae(ep);
  }
  auto sketches = load_sketches(in);
  for (auto& s : sketches) {
    if (s.category != category)
      throw std::invalid_argument("segmenter was trained for '" + category + "', input sketch is '" + s.category + "'");
    const auto labels = predict_labels(seg.model, variant, encoder ? &encoder->model : nullptr, s);
    for (std::size_t i = 0; i < labels.size(); ++i) s.strokes[i].label = labels[i];
  }
  m.write_output(a.output, sketches_text(sketches));
  m.finish(manifest_path(c, a.output + ".manifest.json"));
}

struct RenderArgs {
  std::string input, output_dir;
  std::size_t limit = 0;
  bool no_labels = false;
};

void run_render(const RenderArgs& a, const Common& c, RunManifest& m) {
  const fs::path in = cli::resolve_input(a.input);
  m.add_input(in);
  m.config() = {{"limit", a.limit}, {"no_labels", a.no_labels}, {"palette", kPalette}};
  auto sketches = load_sketches(in);
  if (a.limit > 0 && sketches.size() > a.limit) sketches.resize(a.limit);
  for (std::size_t i = 0; i < sketches.size(); ++i) {
    Sketch s = sketches[i];
    if (a.no_labels)
      for (auto& st : s.strokes) st.label.reset();
    char name[32];
    std::snprintf(name, sizeof name, "sketch_%04zu.svg", i);
    m.write_output(fs::path(a.output_dir) / name, render_svg(s));
  }
  m.finish(manifest_path(c, fs::path(a.output_dir) / "manifest.json"));
}

int run(const std::vector<std::string>& args);

/// Re-runs the recorded command and compares every output checksum.
int run_replay(const std::string& manifest_file, std::string replay_manifest) {
  const json doc = json::parse(cli::read_file(manifest_file));
  if (replay_manifest.empty()) replay_manifest = manifest_file + ".replay.json";
  replay_manifest = fs::absolute(replay_manifest).string();
  const fs::path here = fs::current_path();
  fs::current_path(doc.at("cwd").get<std::string>());

  int status = 0;
  for (const auto& [path, sum] : doc.at("inputs").items())
    if (cli::file_sha256(path) != sum.get<std::string>()) {
      std::cerr << "input changed since the recorded run: " << path << "\n";
      status = 1;
    }
  if (status == 0) {
    std::vector<std::string> args = {doc.at("command").get<std::string>()};
    const auto recorded = doc.at("args").get<std::vector<std::string>>();
    for (std::size_t i = 0; i < recorded.size(); ++i) {
      if (recorded[i] == "--manifest") {
        ++i;
        continue;
      }
      args.push_back(recorded[i]);
    }
    args.push_back("--manifest");
    args.push_back(replay_manifest);
    status = run(args);
    if (status == 0)
      for (const auto& [path, sum] : doc.at("outputs").items()) {
        const bool same = fs::exists(path) && cli::file_sha256(path) == sum.get<std::string>();
        std::cout << (same ? "identical " : "DIFFERS   ") << path << "\n";
        if (!same) status = 1;
      }
  }
  fs::current_path(here);
  return status;
}

int run(const std::vector<std::string>& args) {
  CLI::App app{"Stroke autoencoder and stroke segmentation experiments"};
  app.require_subcommand(1);
  Common common;

  PreprocessArgs pre;
  auto* c_pre = app.add_subcommand("preprocess", "Normalize, resample, simplify and drop tiny strokes");
  c_pre->add_option("--input", pre.input)->required();
  c_pre->add_option("--output", pre.output)->required();
  c_pre->add_option("--epsilon", pre.options.epsilon, "Simplification tolerance in pixels")->capture_default_str();
  c_pre->add_option("--min-len", pre.options.min_length, "Drop strokes shorter than this")->capture_default_str();
  c_pre->add_option("--spacing", pre.options.spacing, "Resampling step in pixels")->capture_default_str();
  add_common(c_pre, common);

  SynthArgs syn;
  auto* c_syn = app.add_subcommand("synth", "Generate labelled synthetic sketches");
  c_syn->add_option("--category", syn.category)->check(CLI::IsMember(synthetic_categories()))->capture_default_str();
  c_syn->add_option("--count", syn.count)->capture_default_str();
  c_syn->add_option("--output", syn.output)->required();
  add_common(c_syn, common);

  TrainVaeArgs tv;
  auto* c_tv = app.add_subcommand("train-vae", "Train the stroke autoencoder");
  c_tv->add_option("--data", tv.data)->required();
  c_tv->add_option("--output-dir", tv.output_dir)->required();
  c_tv->add_option("--config", tv.config, "JSON or key = value file");
  c_tv->add_option("--epochs", tv.epochs)->capture_default_str()->check(CLI::NonNegativeNumber);
  c_tv->add_option("--resume", tv.resume, "Continue from a checkpoint");
  c_tv->add_option("--category", tv.category, "Recorded in the checkpoint");
  c_tv->add_flag("--no-augment", tv.no_augment);
  add_common(c_tv, common);

  ReconstructArgs rc;
  auto* c_rc = app.add_subcommand("reconstruct", "Encode and re-sample sketches at several temperatures");
  c_rc->add_option("--checkpoint", rc.checkpoint)->required();
  c_rc->add_option("--input", rc.input)->required();
  c_rc->add_option("--output-dir", rc.output_dir)->required();
  c_rc->add_option("--tau", rc.tau)->delimiter(',')->capture_default_str();
  c_rc->add_option("--limit", rc.limit);
  c_rc->add_flag("--mean-latent", rc.mean_latent, "Decode from the posterior mean");
  add_common(c_rc, common);

  SegArgs ts, es;
  auto seg_options = [&](CLI::App* cmd, SegArgs& s) {
    cmd->add_option("--data", s.data)->required();
    cmd->add_option("--encoder", s.encoder, "Autoencoder checkpoint used as the fixed feature extractor");
    cmd->add_option("--category", s.category);
    cmd->add_option("--feature", s.features, "nn, idm, idm-spt or idm-spt-con")->delimiter(',')->capture_default_str();
    cmd->add_option("--config", s.seg_config, "Segmentation head config file");
    add_common(cmd, common);
  };
  auto* c_ts = app.add_subcommand("train-seg", "Train the segmentation head on all annotated data");
  seg_options(c_ts, ts);
  c_ts->add_option("--output-dir", ts.output)->required();

  auto* c_es = app.add_subcommand("eval-seg", "Cross-validate the segmentation head");
  seg_options(c_es, es);
  c_es->add_option("--output", es.output, "JSON report")->required();
  c_es->add_option("--folds", es.folds)->capture_default_str()->check(CLI::Range(2, 1000));
  c_es->add_option("--train-sizes", es.train_sizes, "Training-set sizes in sketches")->delimiter(',');
  c_es->add_option("--dump-features", es.dump_features, "Line-delimited JSON feature dump");

  PredictArgs pr;
  auto* c_pr = app.add_subcommand("predict", "Label strokes with a trained segmenter");
  c_pr->add_option("--segmenter", pr.segmenter)->required();
  c_pr->add_option("--encoder", pr.encoder);
  c_pr->add_option("--input", pr.input)->required();
  c_pr->add_option("--output", pr.output)->required();
  add_common(c_pr, common);

  RenderArgs rd;
  auto* c_rd = app.add_subcommand("render", "Draw sketches as SVG, coloured by label");
  c_rd->add_option("--input", rd.input)->required();
  c_rd->add_option("--output-dir", rd.output_dir)->required();
  c_rd->add_option("--limit", rd.limit);
  c_rd->add_flag("--no-labels", rd.no_labels);
  add_common(c_rd, common);

  std::string replay_file, replay_manifest;
  auto* c_rp = app.add_subcommand("replay", "Re-run a command from its manifest and compare outputs");
  c_rp->add_option("file", replay_file, "Manifest of the run to repeat")->required();
  c_rp->add_option("--manifest", replay_manifest, "Where to write the replay's own manifest");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  const std::vector<std::string> recorded(args.begin() + 1, args.end());
  auto manifest = [&](CLI::App* cmd) { return RunManifest(cmd->get_name(), recorded); };

  if (c_rp->parsed()) return run_replay(replay_file, replay_manifest);
  if (c_pre->parsed()) { auto m = manifest(c_pre); run_preprocess(pre, common, m); }
  else if (c_syn->parsed()) { auto m = manifest(c_syn); run_synth(syn, common, m); }
  else if (c_tv->parsed()) { auto m = manifest(c_tv); run_train_vae(tv, common, m); }
  else if (c_rc->parsed()) { auto m = manifest(c_rc); run_reconstruct(rc, common, m); }
  else if (c_ts->parsed()) { auto m = manifest(c_ts); run_train_seg(ts, common, m); }
  else if (c_es->parsed()) { auto m = manifest(c_es); run_eval_seg(es, common, m); }
  else if (c_pr->parsed()) { auto m = manifest(c_pr); run_predict(pr, common, m); }
  else if (c_rd->parsed()) { auto m = manifest(c_rd); run_render(rd, common, m); }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    return run(args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
