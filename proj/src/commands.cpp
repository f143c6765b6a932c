#include "df/pipeline/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "df/ddg/graft.hpp"
#include "df/ddg/train.hpp"
#include "df/error.hpp"
#include "df/reward/reward.hpp"
#include "df/rng.hpp"
#include "json.hpp"

namespace df::pipeline {

namespace fs = std::filesystem;

namespace {

constexpr const char* kGeneratorTag = "dfgen 1";

void ensure_dir(const std::string& path) {
  std::error_code ec;
  fs::create_directories(path, ec);
  if (ec) throw NumericError("cannot create directory " + path + ": " + ec.message());
}

DepthMap read_frame(const std::string& base, const std::string& rel) {
  return read_dmap(base + "/" + rel);
}

std::vector<DepthMap> read_set(const DatasetManifest& m, const std::string& base, int n,
                               const std::string& which) {
  std::vector<DepthMap> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    const auto& f = m.frames[i];
    const std::string* rel = nullptr;
    if (which == "clean")
      rel = &f.clean;
    else if (which == "sensor")
      rel = &f.sensor;
    else if (which == "prior")
      rel = &f.prior;
    else if (which == "grafted")
      rel = &f.grafted;
    else if (which == "predicted")
      rel = &f.predicted;
    else
      throw ValidationError("unknown frame set '" + which + "'");
    if (rel->empty())
      throw ValidationError("manifest: frame " + std::to_string(f.id) + " has no " + which +
                            " map; run generate first");
    out.push_back(read_frame(base, *rel));
  }
  return out;
}

std::vector<DepthMap> baseline_set(const RunConfig& cfg, const DatasetManifest& m,
                                   const std::vector<DepthMap>& clean) {
  std::vector<DepthMap> out;
  out.reserve(clean.size());
  for (std::size_t i = 0; i < clean.size(); ++i)
    out.push_back(sensor::random_noise_baseline(
        clean[i], cfg.baseline,
        mix_seed(cfg.seed, kBaselineStream, static_cast<std::uint64_t>(m.frames[i].id))));
  return out;
}

int eval_count(const RunConfig& cfg, const DatasetManifest& m) {
  const int n = std::min<long>(cfg.eval_frames, static_cast<long>(m.frames.size()));
  if (n < 2) throw ValidationError("eval: need at least 2 frames");
  return n;
}

}  // namespace

std::string cmd_gen(const RunConfig& cfg) {
  cfg.validate();
  const std::string data = cfg.out_dir + "/data";
  ensure_dir(data + "/clean");
  ensure_dir(data + "/sensor");
  ensure_dir(data + "/prior");
  write_resolved_config(cfg, cfg.out_dir + "/resolved_config.json");

  DatasetManifest m;
  m.width = cfg.scene.width;
  m.height = cfg.scene.height;
  m.generator = kGeneratorTag;
  m.frames.reserve(cfg.frames);

  for (int i = 0; i < cfg.frames; ++i) {
    FrameRecord f;
    f.id = i;
    f.scene_seed = mix_seed(cfg.seed, kSceneStream, static_cast<std::uint64_t>(i));
    const auto scn = scene::sample_scene(f.scene_seed, cfg.scene);
    const auto clean = scene::render_depth(scn, cfg.scene.z_near, cfg.scene.z_far);
    const auto corrupted = sensor::corrupt(
        clean, scn, cfg.sensor, mix_seed(cfg.seed, kSensorStream, static_cast<std::uint64_t>(i)));
    const auto pri = prior::make_prior(clean, cfg.prior);

    const auto name = frame_name(i);
    f.clean = "clean/" + name;
    f.sensor = "sensor/" + name;
    f.prior = "prior/" + name;
    write_dmap(data + "/" + f.clean, clean);
    write_dmap(data + "/" + f.sensor, corrupted);
    write_dmap(data + "/" + f.prior, pri);
    m.frames.push_back(std::move(f));
  }
  const auto path = data + "/manifest.json";
  write_manifest(m, path);
  return path;
}

std::string cmd_train(const RunConfig& cfg, const std::string& manifest_path) {
  cfg.validate();
  const auto mpath = manifest_path.empty() ? cfg.out_dir + "/data/manifest.json" : manifest_path;
  const auto m = load_manifest(mpath);
  if (m.width != cfg.scene.width || m.height != cfg.scene.height)
    throw ValidationError("train: manifest raster " + std::to_string(m.width) + "x" +
                          std::to_string(m.height) + " does not match configured " +
                          std::to_string(cfg.scene.width) + "x" +
                          std::to_string(cfg.scene.height));

  const auto base = manifest_dir(mpath);
  std::vector<ddg::TrainItem> items;
  items.reserve(m.frames.size());
  for (const auto& f : m.frames) {
    ddg::TrainItem it;
    it.d0 = ddg::encode_depth(read_frame(base, f.sensor), cfg.model.z_far);
    it.cond = ddg::encode_prior(read_frame(base, f.prior));
    items.push_back(std::move(it));
  }

  const std::string model_dir = cfg.out_dir + "/model";
  ensure_dir(model_dir);
  write_resolved_config(cfg, model_dir + "/resolved_config.json");

  auto model = ddg::make_model(cfg.model, cfg.seed);
  auto tc = cfg.train;
  tc.width = m.width;
  tc.height = m.height;
  tc.seed = cfg.seed;
  tc.out_dir = model_dir;
  ddg::train(model, items, tc);
  ddg::save_model(model, model_dir + "/params.dfck", model_dir + "/model.json");
  return model_dir;
}

std::string cmd_generate(const RunConfig& cfg, const std::string& model_dir,
                         const std::string& manifest_path) {
  cfg.validate();
  const auto mdir = model_dir.empty() ? cfg.out_dir + "/model" : model_dir;
  const auto mpath = manifest_path.empty() ? cfg.out_dir + "/data/manifest.json" : manifest_path;
  const auto m = load_manifest(mpath);
  const auto base = manifest_dir(mpath);

  const auto weights = mdir + (cfg.use_ema ? "/ema.dfck" : "/params.dfck");
  auto model = ddg::load_model(weights, mdir + "/model.json");

  const std::string gen = cfg.out_dir + "/gen";
  ensure_dir(gen + "/grafted");
  ensure_dir(gen + "/predicted");

  ddg::GenerateConfig gc;
  gc.prior = cfg.prior;
  gc.graft = cfg.graft;
  gc.ddim_steps = cfg.ddim_steps;
  gc.eta = cfg.eta;
  gc.use_ddpm = cfg.use_ddpm;

  // source paths rewritten relative to the new manifest's directory
  std::error_code ec;
  auto rebase = fs::relative(fs::absolute(base), fs::absolute(gen), ec);
  if (ec) throw NumericError("cannot relativize " + base + " against " + gen);

  DatasetManifest aug = m;
  for (std::size_t i = 0; i < m.frames.size(); ++i) {
    const auto& f = m.frames[i];
    const auto clean = read_frame(base, f.clean);
    const auto g = ddg::generate_noisy_depth(
        model, clean, gc, mix_seed(cfg.seed, kSampleStream, static_cast<std::uint64_t>(f.id)));
    const auto name = frame_name(f.id);
    write_dmap(gen + "/grafted/" + name, g.final);
    write_dmap(gen + "/predicted/" + name, g.predicted);
    auto& r = aug.frames[i];
    r.clean = (rebase / f.clean).string();
    r.sensor = (rebase / f.sensor).string();
    r.prior = (rebase / f.prior).string();
    r.grafted = "grafted/" + name;
    r.predicted = "predicted/" + name;
  }
  const auto out_path = gen + "/manifest.json";
  write_manifest(aug, out_path);
  return out_path;
}

std::vector<metrics::MethodScore> compute_scores(const RunConfig& cfg, const DatasetManifest& m,
                                                 const std::string& base_dir) {
  const int n = eval_count(cfg, m);
  const auto ex = metrics::make_extractor(cfg.feature_seed, cfg.model.z_far);

  const auto sensor_maps = read_set(m, base_dir, n, "sensor");
  const auto clean = read_set(m, base_dir, n, "clean");
  const auto grafted = read_set(m, base_dir, n, "grafted");
  const auto predicted = read_set(m, base_dir, n, "predicted");
  const auto random = baseline_set(cfg, m, clean);

  const auto ref = metrics::extract_features(sensor_maps, ex, "virtual-sensor");
  std::vector<metrics::FeatureMatrix> cands;
  cands.push_back(metrics::extract_features(clean, ex, "clean"));
  cands.push_back(metrics::extract_features(random, ex, "random-noise"));
  cands.push_back(metrics::extract_features(grafted, ex, "diffusion-grafted"));
  cands.push_back(metrics::extract_features(predicted, ex, "diffusion-raw"));
  return metrics::score_methods(ref, cands);
}

std::string cmd_eval(const RunConfig& cfg, const std::string& manifest_path) {
  cfg.validate();
  const auto mpath = manifest_path.empty() ? cfg.out_dir + "/gen/manifest.json" : manifest_path;
  const auto m = load_manifest(mpath);
  const auto scores = compute_scores(cfg, m, manifest_dir(mpath));
  const auto csv = metrics::report_csv(scores, cfg.feature_seed);
  ensure_dir(cfg.out_dir);
  std::ofstream out(cfg.out_dir + "/eval.csv", std::ios::binary);
  if (!out) throw NumericError("cannot write " + cfg.out_dir + "/eval.csv");
  out << csv;
  return csv;
}

std::string cmd_tsne(const RunConfig& cfg, const std::string& manifest_path,
                     const std::vector<std::string>& sets) {
  cfg.validate();
  if (sets.size() < 2) throw ValidationError("tsne: need at least two sets to compare");
  const auto mpath = manifest_path.empty() ? cfg.out_dir + "/gen/manifest.json" : manifest_path;
  const auto m = load_manifest(mpath);
  const auto base = manifest_dir(mpath);
  const int n = std::min<long>(cfg.tsne_frames, static_cast<long>(m.frames.size()));
  if (n < 2) throw ValidationError("tsne: need at least 2 frames per set");

  const auto ex = metrics::make_extractor(cfg.feature_seed, cfg.model.z_far);
  metrics::FeatureMatrix all;
  all.d = metrics::kFeatureDim;
  std::vector<std::string> labels;
  for (const auto& s : sets) {
    auto maps = s == "random" ? baseline_set(cfg, m, read_set(m, base, n, "clean"))
                              : read_set(m, base, n, s);
    auto f = metrics::extract_features(maps, ex, s);
    all.data.insert(all.data.end(), f.data.begin(), f.data.end());
    all.n += f.n;
    labels.insert(labels.end(), static_cast<std::size_t>(f.n), s);
  }

  const auto y = metrics::tsne(all, cfg.tsne);
  const auto csv = metrics::embedding_csv(y, labels);
  ensure_dir(cfg.out_dir);
  std::ofstream out(cfg.out_dir + "/tsne.csv", std::ios::binary);
  if (!out) throw NumericError("cannot write " + cfg.out_dir + "/tsne.csv");
  out << csv;
  return csv;
}

std::string cmd_reward_audit(const RunConfig& cfg, const std::string& episode_csv,
                             const std::string& out_csv) {
  const auto ep = reward::read_episode_csv(episode_csv);
  const auto rows = reward::score_episode(ep, cfg.reward);
  const auto path = out_csv.empty() ? episode_csv + ".breakdown.csv" : out_csv;
  reward::write_breakdown_csv(path, rows);
  return path;
}

double embedding_knn_purity(const std::vector<double>& xy, const std::vector<int>& labels,
                            int k) {
  const int n = static_cast<int>(labels.size());
  if (xy.size() != static_cast<std::size_t>(n) * 2 || n < k + 1)
    throw ValidationError("knn purity: inconsistent input sizes");
  double total = 0.0;
  std::vector<std::pair<double, int>> dist;
  for (int i = 0; i < n; ++i) {
    dist.clear();
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const double dx = xy[2 * i] - xy[2 * j], dy = xy[2 * i + 1] - xy[2 * j + 1];
      dist.emplace_back(dx * dx + dy * dy, j);
    }
    std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
    int same = 0;
    for (int t = 0; t < k; ++t)
      if (labels[dist[t].second] == labels[i]) ++same;
    total += static_cast<double>(same) / k;
  }
  return total / n;
}

namespace {

struct CheckList {
  std::vector<PipelineCheck>& out;
  void add(const std::string& name, bool pass, std::string detail) {
    out.push_back({name, pass, std::move(detail)});
  }
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// fraction of pixels that read as sensor artifacts (at or below the mask
// threshold in z/z_far units)
double artifact_fraction(const DepthMap& d, const RunConfig& cfg) {
  const float cut = cfg.graft.noise_threshold * cfg.model.z_far;
  std::size_t c = 0;
  for (float v : d.values)
    if (v <= cut) ++c;
  return static_cast<double>(c) / static_cast<double>(d.size());
}

double purity_of_pair(const RunConfig& cfg, const std::vector<DepthMap>& a,
                      const std::vector<DepthMap>& b, const std::string& la,
                      const std::string& lb) {
  const auto ex = metrics::make_extractor(cfg.feature_seed, cfg.model.z_far);
  auto fa = metrics::extract_features(a, ex, la);
  auto fb = metrics::extract_features(b, ex, lb);
  metrics::FeatureMatrix all;
  all.d = fa.d;
  all.n = fa.n + fb.n;
  all.data = fa.data;
  all.data.insert(all.data.end(), fb.data.begin(), fb.data.end());
  std::vector<int> labels(all.n, 0);
  std::fill(labels.begin() + fa.n, labels.end(), 1);
  auto tc = cfg.tsne;
  tc.perplexity = std::min(tc.perplexity, all.n / 3.0 - 1.0);
  if (tc.perplexity < 2.0) throw ValidationError("purity check: too few frames for tsne");
  const auto y = metrics::tsne(all, tc);
  return embedding_knn_purity(y, labels, 10);
}

}  // namespace

PipelineReport evaluate_run(const RunConfig& cfg) {
  cfg.validate();
  PipelineReport rep;
  CheckList checks{rep.checks};

  rep.manifest_path = cfg.out_dir + "/data/manifest.json";
  rep.model_dir = cfg.out_dir + "/model";
  const auto aug_path = cfg.out_dir + "/gen/manifest.json";
  const auto aug = load_manifest(aug_path);
  const auto base = manifest_dir(aug_path);

  rep.scores = compute_scores(cfg, aug, base);
  rep.eval_csv_path = cfg.out_dir + "/eval.csv";
  {
    std::ofstream out(rep.eval_csv_path, std::ios::binary);
    if (!out) throw NumericError("cannot write " + rep.eval_csv_path);
    out << metrics::report_csv(rep.scores, cfg.feature_seed);
  }

  const int n = eval_count(cfg, aug);
  const auto clean = read_set(aug, base, n, "clean");
  const auto sensor_maps = read_set(aug, base, n, "sensor");
  const auto grafted = read_set(aug, base, n, "grafted");
  const auto predicted = read_set(aug, base, n, "predicted");

  // sample triptychs for eyeballing: clean | sensor | grafted
  for (int i = 0; i < std::min(8, n); ++i)
    write_pgm16_triptych(cfg.out_dir + "/triptych_" + std::to_string(i) + ".pgm", clean[i],
                         sensor_maps[i], grafted[i], cfg.model.z_far / 65535.0);

  // 1. graft exactness: off-mask pixels equal the clean render bit-exactly,
  //    on-mask pixels equal the raw prediction bit-exactly
  {
    bool exact = true;
    for (int i = 0; i < n && exact; ++i) {
      std::vector<float> norm(predicted[i].values);
      for (auto& v : norm) v /= cfg.model.z_far;
      const auto mask =
          ddg::make_mask(norm, predicted[i].width, predicted[i].height, cfg.graft);
      for (std::size_t p = 0; p < mask.size(); ++p) {
        const float want = mask[p] ? predicted[i].values[p] : clean[i].values[p];
        if (grafted[i].values[p] != want) {
          exact = false;
          break;
        }
      }
    }
    checks.add("graft-exactness", exact,
               exact ? "all off-mask pixels bit-equal clean, on-mask bit-equal prediction"
                     : "composite mismatch");
  }

  // 2. metric ordering: clean > random-noise > grafted, and grafted at most
  //    half of clean
  {
    double f_clean = 0, f_rand = 0, f_graft = 0;
    double k_clean = 0, k_rand = 0, k_graft = 0;
    for (const auto& s : rep.scores) {
      if (s.method == "clean") f_clean = s.fid, k_clean = s.kid;
      if (s.method == "random-noise") f_rand = s.fid, k_rand = s.kid;
      if (s.method == "diffusion-grafted") f_graft = s.fid, k_graft = s.kid;
    }
    const bool order = f_clean > f_rand && f_rand > f_graft;
    const bool factor = f_graft <= 0.5 * f_clean;
    checks.add("fid-ordering", order,
               "clean " + fmt(f_clean) + " > random " + fmt(f_rand) + " > grafted " +
                   fmt(f_graft));
    checks.add("fid-factor", factor, "grafted " + fmt(f_graft) + " vs half of clean " +
                                         fmt(0.5 * f_clean));

    // split-half distance of the reference against itself bounds how much of
    // the clean distance is sampling noise
    const auto ex = metrics::make_extractor(cfg.feature_seed, cfg.model.z_far);
    const int half = n / 2;
    const std::vector<DepthMap> h1(sensor_maps.begin(), sensor_maps.begin() + half);
    const std::vector<DepthMap> h2(sensor_maps.begin() + half, sensor_maps.begin() + 2 * half);
    const double self_fid =
        metrics::fid(metrics::gaussian_stats(metrics::extract_features(h1, ex, "half1")),
                     metrics::gaussian_stats(metrics::extract_features(h2, ex, "half2")));
    checks.add("fid-floor", self_fid < 0.1 * f_clean,
               "sensor split-half " + fmt(self_fid) + " vs 10% of clean " +
                   fmt(0.1 * f_clean));

    // the kernel distance should rank methods the same way; disagreement is
    // reported but does not gate the run
    const bool concord = (k_clean > k_rand) == (f_clean > f_rand) &&
                         (k_rand > k_graft) == (f_rand > f_graft);
    rep.notes.push_back(std::string("kid/fid ordering ") +
                        (concord ? "concordant" : "DISCORDANT") + ": kid clean " +
                        fmt(k_clean) + " random " + fmt(k_rand) + " grafted " + fmt(k_graft));
  }

  // 3. ablation: the raw prediction is not metrically trustworthy off-mask,
  //    unlike the graft (bound: mean stereo axial sigma over those pixels)
  {
    double err_sum = 0.0, bound_sum = 0.0;
    std::size_t count = 0;
    const double fb = cfg.sensor.f * cfg.sensor.b;
    for (int i = 0; i < n; ++i) {
      std::vector<float> norm(predicted[i].values);
      for (auto& v : norm) v /= cfg.model.z_far;
      const auto mask =
          ddg::make_mask(norm, predicted[i].width, predicted[i].height, cfg.graft);
      for (std::size_t p = 0; p < mask.size(); ++p) {
        if (mask[p]) continue;
        const double z = clean[i].values[p];
        err_sum += std::abs(predicted[i].values[p] - clean[i].values[p]);
        bound_sum += cfg.sensor.sigma_d * z * z / fb;
        ++count;
      }
    }
    const double err = count ? err_sum / count : 0.0;
    const double bound = count ? bound_sum / count : 0.0;
    checks.add("raw-output-ablation", count > 0 && err > 10.0 * bound,
               "off-mask error " + fmt(err) + " vs 10x axial bound " + fmt(10.0 * bound));
  }

  // 4. domain purity: clean separates from the sensor domain, the graft does
  //    not
  {
    const int np = std::min(n, cfg.tsne_frames);
    std::vector<DepthMap> c2(clean.begin(), clean.begin() + np);
    std::vector<DepthMap> s2(sensor_maps.begin(), sensor_maps.begin() + np);
    std::vector<DepthMap> g2(grafted.begin(), grafted.begin() + np);
    const double sep = purity_of_pair(cfg, c2, s2, "clean", "sensor");
    const double mix = purity_of_pair(cfg, g2, s2, "grafted", "sensor");
    checks.add("purity-separated", sep > 0.8, "clean-vs-sensor purity " + fmt(sep));
    checks.add("purity-intermingled", mix < 0.7, "grafted-vs-sensor purity " + fmt(mix));
  }

  // 5. artifact coverage tracks the corruption oracle within +-50% relative
  {
    double hg = 0.0, hs = 0.0;
    for (int i = 0; i < n; ++i) {
      hg += artifact_fraction(grafted[i], cfg);
      hs += artifact_fraction(sensor_maps[i], cfg);
    }
    hg /= n;
    hs /= n;
    const bool ok = hs > 0.0 && hg >= 0.5 * hs && hg <= 1.5 * hs;
    checks.add("hole-fraction-band", ok,
               "grafted " + fmt(hg) + " vs sensor " + fmt(hs) + " (band 0.5x..1.5x)");
  }

  // 6. conditioning matters: predictions sit closer to their own scene's
  //    sensor target than to another scene's
  {
    double same = 0.0, other = 0.0;
    for (int i = 0; i < n; ++i) {
      const auto& p = predicted[i];
      const auto& t = sensor_maps[i];
      const auto& u = sensor_maps[(i + 1) % n];
      double ds = 0.0, du = 0.0;
      for (std::size_t q = 0; q < p.size(); ++q) {
        ds += std::abs(p.values[q] - t.values[q]);
        du += std::abs(p.values[q] - u.values[q]);
      }
      same += ds / p.size();
      other += du / p.size();
    }
    same /= n;
    other /= n;
    checks.add("conditioning-matters", same < other,
               "L1 to own target " + fmt(same) + " vs shuffled " + fmt(other));
  }

  // 7. optimization made progress: smoothed loss at 2000 steps and at the
  //    end is at most half the first recorded loss
  {
    std::ifstream st(rep.model_dir + "/state.json");
    double first_loss = 0.0, ema_loss = 0.0;
    if (st) {
      nlohmann::json j = nlohmann::json::parse(st, nullptr, false);
      if (!j.is_discarded()) {
        first_loss = j.value("first_loss", 0.0);
        ema_loss = j.value("ema_loss", 0.0);
      }
    }
    double ema_at_2000 = 0.0;
    std::ifstream lc(rep.model_dir + "/loss.csv");
    std::string line;
    std::getline(lc, line);  // header
    while (std::getline(lc, line)) {
      long step = 0;
      double loss = 0.0, ema = 0.0;
      if (std::sscanf(line.c_str(), "%ld,%lf,%lf", &step, &loss, &ema) == 3 && step <= 2000)
        ema_at_2000 = ema;
    }
    const bool halved_early = cfg.train.steps < 2000 || ema_at_2000 <= 0.5 * first_loss;
    const bool halved_final = ema_loss <= 0.5 * first_loss;
    checks.add("loss-halved", first_loss > 0.0 && halved_early && halved_final,
               "first " + fmt(first_loss) + ", at-2000 " + fmt(ema_at_2000) + ", final " +
                   fmt(ema_loss));
  }

  // embedding CSV for external plotting; smaller runs shrink the perplexity
  {
    auto tcfg = cfg;
    const int rows = 2 * std::min<long>(cfg.tsne_frames, static_cast<long>(aug.frames.size()));
    tcfg.tsne.perplexity = std::min(tcfg.tsne.perplexity, rows / 3.0 - 1.0);
    if (tcfg.tsne.perplexity >= 2.0) cmd_tsne(tcfg, aug_path, {"sensor", "grafted"});
  }

  rep.ok = true;
  for (const auto& c : rep.checks) rep.ok = rep.ok && c.pass;

  std::ofstream report(cfg.out_dir + "/pipeline_report.txt");
  for (const auto& c : rep.checks)
    report << (c.pass ? "[PASS] " : "[FAIL] ") << c.name << ": " << c.detail << '\n';
  for (const auto& s : rep.notes) report << "[note] " << s << '\n';
  report << (rep.ok ? "OK" : "FAILED") << '\n';
  return rep;
}

PipelineReport cmd_pipeline(const RunConfig& cfg) {
  cfg.validate();
  const auto manifest = cmd_gen(cfg);
  const auto model_dir = cmd_train(cfg, manifest);
  cmd_generate(cfg, model_dir, manifest);
  return evaluate_run(cfg);
}

}  // namespace df::pipeline
