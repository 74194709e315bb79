#include "pxm/eval/protocols.hpp"

#include "pxm/errors.hpp"
#include "pxm/util/seed.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

namespace pxm::eval {
namespace {

using train::Model;

constexpr std::size_t kEncodeChunk = 64;

// Runs fn(chunk_index) for every chunk on up to `workers` threads.
void parallel_chunks(std::size_t chunks, int workers, const std::function<void(std::size_t)>& fn) {
  const auto threads = static_cast<std::size_t>(std::clamp(workers, 1, 64));
  if (threads == 1 || chunks < 2) {
    for (std::size_t c = 0; c < chunks; ++c) fn(c);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t c = t; c < chunks; c += threads) fn(c);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

EmbeddingBatch encode_windows(Model& model, const std::vector<const signal::Signal*>& windows, int workers) {
  EmbeddingBatch out = EmbeddingBatch::zeros(model.ecg.embed_dim, static_cast<Eigen::Index>(windows.size()));
  const std::size_t chunks = (windows.size() + kEncodeChunk - 1) / kEncodeChunk;
  parallel_chunks(chunks, workers, [&](std::size_t c) {
    const std::size_t start = c * kEncodeChunk;
    const std::size_t stop = std::min(windows.size(), start + kEncodeChunk);
    std::vector<const signal::Signal*> part(windows.begin() + static_cast<std::ptrdiff_t>(start),
                                            windows.begin() + static_cast<std::ptrdiff_t>(stop));
    const EmbeddingBatch z = models::ecg_encode_all(model.ecg, part, model.params, kEncodeChunk);
    out.mu.middleCols(static_cast<Eigen::Index>(start), z.size()) = z.mu;
    out.log_var.middleCols(static_cast<Eigen::Index>(start), z.size()) = z.log_var;
  });
  return out;
}

void add_split_metric(EvalReport& r, const std::string& name, const std::vector<int>& pred, const std::vector<int>& truth,
                      const std::vector<std::size_t>& low, const std::vector<std::size_t>& high, const std::string& low_name,
                      const std::string& high_name) {
  auto pick = [&](const std::vector<std::size_t>& idx, const std::string& sub) {
    if (idx.empty()) return;
    std::vector<int> p, t;
    for (std::size_t i : idx) {
      p.push_back(pred[i]);
      t.push_back(truth[i]);
    }
    r.metrics.push_back({name, sub, balanced_accuracy(p, t), idx.size()});
  };
  pick(low, low_name);
  pick(high, high_name);
}

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

void PromptSet::validate() const {
  if (prompts.size() < 2) throw std::invalid_argument("prompt set needs at least two classes");
  for (std::size_t c = 0; c < prompts.size(); ++c)
    if (prompts[c].empty()) throw std::invalid_argument("prompt class " + std::to_string(c) + " is empty");
}

PromptSet lvef_prompts(const synth::CohortConfig& cfg) {
  const auto per_class = synth::class_prompts(cfg);
  PromptSet p;
  p.prompts.resize(2);
  for (int c = 0; c < cfg.num_classes; ++c) {
    auto& dst = p.prompts[static_cast<std::size_t>(synth::label_lvef(c, cfg))];
    const auto& src = per_class[static_cast<std::size_t>(c)];
    dst.insert(dst.end(), src.begin(), src.end());
  }
  p.validate();
  return p;
}

std::vector<std::vector<Eigen::VectorXd>> encode_prompts(const PromptSet& prompts, Model& model) {
  prompts.validate();
  std::vector<std::vector<Eigen::VectorXd>> out(prompts.classes());
  for (std::size_t c = 0; c < prompts.classes(); ++c) {
    const EmbeddingBatch z = models::text_encode_all(model.text, prompts.prompts[c], model.params);
    for (Eigen::Index j = 0; j < z.size(); ++j) out[c].push_back(z.mu.col(j));
  }
  return out;
}

void EvalReport::validate() const {
  std::map<std::string, std::map<std::string, std::size_t>> counts;
  for (const auto& m : metrics) {
    if (!(m.value >= 0.0 && m.value <= 1.0)) {
      throw InvariantError(task + ": metric " + m.name + "/" + m.subgroup + " = " + std::to_string(m.value) +
                           " outside [0, 1]");
    }
    counts[m.name][m.subgroup] = m.n;
  }
  for (const auto& [name, sub] : counts) {
    const auto all = sub.find("all");
    if (all == sub.end()) continue;
    for (const std::string kind : {"var", "entropy"}) {
      const auto lo = sub.find("low_" + kind);
      const auto hi = sub.find("high_" + kind);
      const std::size_t n = (lo == sub.end() ? 0 : lo->second) + (hi == sub.end() ? 0 : hi->second);
      if ((lo != sub.end() || hi != sub.end()) && n != all->second) {
        throw InvariantError(task + ": " + name + " " + kind + " subgroups hold " + std::to_string(n) + " of " +
                             std::to_string(all->second) + " samples");
      }
    }
  }
}

const Metric* EvalReport::find(const std::string& name, const std::string& subgroup) const {
  for (const auto& m : metrics)
    if (m.name == name && m.subgroup == subgroup) return &m;
  return nullptr;
}

void write_reports_csv(const std::filesystem::path& path, const std::vector<EvalReport>& reports) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "task,seed,config_hash,metric,subgroup,n,value\n";
  char buf[64];
  for (const auto& r : reports) {
    for (const auto& m : r.metrics) {
      std::snprintf(buf, sizeof buf, "%.17g", m.value);
      out << r.task << ',' << r.seed << ',' << r.config_hash << ',' << m.name << ',' << m.subgroup << ',' << m.n << ','
          << buf << '\n';
    }
  }
}

std::string format_reports(const std::vector<EvalReport>& reports) {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-10s %-14s %-13s %6s %8s\n", "task", "metric", "subgroup", "n", "value");
  os << buf;
  for (const auto& r : reports) {
    for (const auto& m : r.metrics) {
      std::snprintf(buf, sizeof buf, "%-10s %-14s %-13s %6zu %8.4f\n", r.task.c_str(), m.name.c_str(),
                    m.subgroup.c_str(), m.n, m.value);
      os << buf;
    }
  }
  return os.str();
}

SplitEmbeddings embed_split(Model& model, const synth::Cohort& cohort, synth::Split split, int workers) {
  SplitEmbeddings e;
  e.samples = cohort.split(split);
  if (e.samples.empty()) throw ShapeError("embed_split: the split is empty");
  const train::TrainData data = train::prepare_data(e.samples, model.ecg);
  std::vector<const signal::Signal*> windows;
  for (const auto& w : data.normalized) windows.push_back(&w);
  e.ecg = encode_windows(model, windows, workers);
  e.text = models::text_encode_all(model.text, data.tokens, model.params);
  e.labels = data.labels;
  for (const auto* s : e.samples) e.lvef.push_back(s->lvef);
  for (Eigen::Index i = 0; i < e.ecg.size(); ++i) e.uncertainty.push_back(uncertainty_scalar(e.ecg.at(i)));
  return e;
}

EvalReport evaluate_zeroshot(const SplitEmbeddings& test, const std::vector<std::vector<Eigen::VectorXd>>& prompts,
                             const EvalOptions& opt) {
  EvalReport r{"zeroshot", opt.seed, opt.config_hash, {}};
  std::vector<int> pred;
  for (Eigen::Index i = 0; i < test.ecg.size(); ++i) pred.push_back(zeroshot_classify(test.ecg.mu.col(i), prompts));
  r.metrics.push_back({"balanced_acc", "all", balanced_accuracy(pred, test.lvef), pred.size()});
  const MedianSplit s = median_split(test.uncertainty);
  add_split_metric(r, "balanced_acc", pred, test.lvef, s.low, s.high, "low_var", "high_var");
  r.validate();
  return r;
}

EvalReport evaluate_zeroshot(Model& model, const synth::Cohort& cohort, const EvalOptions& opt) {
  const SplitEmbeddings test = embed_split(model, cohort, synth::Split::test, opt.workers);
  return evaluate_zeroshot(test, encode_prompts(lvef_prompts(cohort.config), model), opt);
}

std::vector<std::size_t> stratified_subset(const std::vector<int>& labels, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("probe_fraction", "must lie in (0, 1]");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  std::vector<std::size_t> out;
  for (auto& [label, idx] : by_class) {
    std::mt19937_64 rng(derive_seed(seed, {6, static_cast<std::uint64_t>(label)}));
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto keep = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(fraction * static_cast<double>(idx.size()))));
    out.insert(out.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(keep));
  }
  std::sort(out.begin(), out.end());
  return out;
}

EvalReport evaluate_probe(Model& model, const synth::Cohort& cohort, double fraction, const EvalOptions& opt) {
  const SplitEmbeddings train_e = embed_split(model, cohort, synth::Split::train, opt.workers);
  const SplitEmbeddings test = embed_split(model, cohort, synth::Split::test, opt.workers);
  const std::vector<std::size_t> keep = stratified_subset(train_e.lvef, fraction, opt.seed);
  Eigen::MatrixXd x(train_e.ecg.dim(), static_cast<Eigen::Index>(keep.size()));
  std::vector<int> y;
  for (std::size_t k = 0; k < keep.size(); ++k) {
    x.col(static_cast<Eigen::Index>(k)) = train_e.ecg.mu.col(static_cast<Eigen::Index>(keep[k]));
    y.push_back(train_e.lvef[keep[k]]);
  }
  const ProbeResult probe = linear_probe(x, y, test.ecg.mu);

  char task[32];
  std::snprintf(task, sizeof task, "probe%.0f", 100.0 * fraction);
  EvalReport r{task, opt.seed, opt.config_hash, {}};
  r.metrics.push_back({"balanced_acc", "all", balanced_accuracy(probe.predictions, test.lvef), test.lvef.size()});
  const MedianSplit s = median_split(test.uncertainty);
  add_split_metric(r, "balanced_acc", probe.predictions, test.lvef, s.low, s.high, "low_var", "high_var");

  // Entropy baseline: the probability of the reduced-EF class.
  std::vector<std::size_t> low_h, high_h;
  const auto pos = std::find(probe.model.classes.begin(), probe.model.classes.end(), 1) - probe.model.classes.begin();
  for (Eigen::Index j = 0; j < probe.probabilities.cols(); ++j) {
    const double p = std::clamp(probe.probabilities(pos, j), 0.0, 1.0);
    (binary_entropy(p) > kEntropyThreshold ? high_h : low_h).push_back(static_cast<std::size_t>(j));
  }
  add_split_metric(r, "balanced_acc", probe.predictions, test.lvef, low_h, high_h, "low_entropy", "high_entropy");
  r.validate();
  return r;
}

MatchMatrix class_match(const std::vector<int>& rows, const std::vector<int>& cols) {
  MatchMatrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i] == cols[j];
  return m;
}

EvalReport evaluate_retrieval(const SplitEmbeddings& test, const std::vector<int>& ks, const EvalOptions& opt) {
  EvalReport r{"retrieve", opt.seed, opt.config_hash, {}};
  const Eigen::MatrixXd sim = cosine_matrix(test.text.mu, test.ecg.mu);
  const MatchMatrix m = class_match(test.labels, test.labels);
  for (int k : ks) r.metrics.push_back({"R@" + std::to_string(k), "all", recall_at_k(sim, m, k), test.labels.size()});
  r.validate();
  return r;
}

EvalReport evaluate_retrieval(Model& model, const synth::Cohort& cohort, const std::vector<int>& ks,
                              const EvalOptions& opt) {
  return evaluate_retrieval(embed_split(model, cohort, synth::Split::test, opt.workers), ks, opt);
}

WindowSelection select_window(const signal::Signal& record, Model& model, double stride_s) {
  const double length_s = static_cast<double>(model.ecg.samples) / model.ecg.input_fs;
  const std::vector<signal::Window> windows = signal::sliding_windows(record, length_s, stride_s);
  std::vector<signal::Signal> prepared;
  WindowSelection sel;
  for (const auto& w : windows) {
    prepared.push_back(signal::zscore_normalize(train::prepare_window(w.signal, model.ecg)));
    sel.offsets_s.push_back(w.offset_seconds);
  }
  std::vector<const signal::Signal*> ptrs;
  for (const auto& p : prepared) ptrs.push_back(&p);
  const EmbeddingBatch z = models::ecg_encode_all(model.ecg, ptrs, model.params, kEncodeChunk);
  for (Eigen::Index i = 0; i < z.size(); ++i) sel.uncertainty.push_back(uncertainty_scalar(z.at(i)));
  sel.index = static_cast<std::size_t>(std::min_element(sel.uncertainty.begin(), sel.uncertainty.end()) -
                                       sel.uncertainty.begin());
  return sel;
}

EvalReport evaluate_windows(Model& model, const synth::Cohort& cohort, double stride_s, const EvalOptions& opt,
                            std::vector<WindowSelection>* traces) {
  if (cohort.long_records.empty()) throw ShapeError("window task: the cohort has no long records");
  const double length_s = static_cast<double>(model.ecg.samples) / model.ecg.input_fs;
  std::vector<WindowSelection> sel(cohort.long_records.size());
  parallel_chunks(sel.size(), opt.workers,
                  [&](std::size_t i) { sel[i] = select_window(cohort.long_records[i].ecg, model, stride_s); });
  double clean = 0.0;
  for (std::size_t i = 0; i < sel.size(); ++i)
    if (!cohort.long_records[i].window_has_burst(sel[i].offsets_s[sel[i].index], length_s)) clean += 1.0;
  EvalReport r{"window", opt.seed, opt.config_hash, {}};
  r.metrics.push_back({"burst_excluded", "all", clean / static_cast<double>(sel.size()), sel.size()});
  r.validate();
  if (traces) *traces = std::move(sel);
  return r;
}

void write_trace_csv(const std::filesystem::path& path, const std::vector<WindowSelection>& traces) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "record,window_offset_s,uncertainty,selected\n";
  char buf[96];
  for (std::size_t r = 0; r < traces.size(); ++r) {
    for (std::size_t w = 0; w < traces[r].offsets_s.size(); ++w) {
      std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%d\n", r, traces[r].offsets_s[w], traces[r].uncertainty[w],
                    w == traces[r].index ? 1 : 0);
      out << buf;
    }
  }
}

AblationResult ablation_run(const synth::Cohort& cohort, const train::TrainSetup& base,
                            const std::vector<train::LossVariant>& variants, const std::vector<std::uint64_t>& seeds,
                            int workers, const AblationHook& hook) {
  if (seeds.size() < 3) throw ConfigError("seeds", "ablation needs at least three seeds");
  if (variants.empty()) throw ConfigError("variants", "no variant given");
  AblationResult out;
  const PromptSet prompts = lvef_prompts(cohort.config);
  for (const auto v : variants) {
    AblationRow row;
    row.variant = v;
    std::vector<double> zs, r1;
    for (const auto seed : seeds) {
      train::TrainSetup setup = base;
      setup.train.variant = v;
      setup.train.seed = seed;
      train::FitResult fit = train::fit(cohort, setup);
      const EvalOptions opt{seed, {}, workers};
      const SplitEmbeddings test = embed_split(fit.model, cohort, synth::Split::test, workers);
      AblationRun run{v, seed, 0.0, 0.0};
      run.zs_balanced_accuracy = evaluate_zeroshot(test, encode_prompts(prompts, fit.model), opt).find("balanced_acc")->value;
      run.r_at_1 = evaluate_retrieval(test, {1}, opt).find("R@1")->value;
      zs.push_back(run.zs_balanced_accuracy);
      r1.push_back(run.r_at_1);
      out.runs.push_back(run);
      if (hook) hook(v, seed, fit);
    }
    row.zs_mean = mean(zs);
    row.zs_sd = sample_sd(zs);
    row.r1_mean = mean(r1);
    row.r1_sd = sample_sd(r1);
    row.runs = seeds.size();
    out.rows.push_back(row);
  }
  return out;
}

void write_ablation_csv(const std::filesystem::path& path, const AblationResult& r) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "variant,runs,zs_balanced_acc_mean,zs_balanced_acc_sd,r_at_1_mean,r_at_1_sd\n";
  char buf[160];
  for (const auto& row : r.rows) {
    std::snprintf(buf, sizeof buf, "%s,%zu,%.17g,%.17g,%.17g,%.17g\n", train::to_string(row.variant).c_str(), row.runs,
                  row.zs_mean, row.zs_sd, row.r1_mean, row.r1_sd);
    out << buf;
  }
}

std::string format_ablation(const AblationResult& r) {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-16s %5s %18s %18s\n", "variant", "runs", "ZS bal. acc", "R@1");
  os << buf;
  for (const auto& row : r.rows) {
    std::snprintf(buf, sizeof buf, "%-16s %5zu %9.4f +- %6.4f %9.4f +- %6.4f\n", train::to_string(row.variant).c_str(),
                  row.runs, row.zs_mean, row.zs_sd, row.r1_mean, row.r1_sd);
    os << buf;
  }
  return os.str();
}

}  // namespace pxm::eval
