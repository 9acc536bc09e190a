#include "itolab/harness.hpp"

#include "itolab/errors.hpp"
#include "itolab/sde.hpp"
#include "itolab/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

namespace itolab {

namespace {

std::string csv_safe(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

void append_warning(std::string& dst, const std::string& w) {
  if (!dst.empty()) dst += "; ";
  dst += w;
}

// A family of (measured, bound) rows; the lemma holds when every row does.
struct Row {
  double measured;
  double bound;
  double std_error;
  std::string where;
};

// Rows are ranked by (measured - 3 stderr) / bound; a zero bound ranks first only when exceeded.
LemmaReport worst_row(const std::string& lemma, const std::vector<Row>& rows) {
  if (rows.empty()) throw DataError(lemma + ": nothing measured");
  auto key = [](const Row& r) {
    const double excess = r.measured - 3.0 * r.std_error;
    if (r.bound > 0.0) return excess / r.bound;
    return excess > 0.0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
  };
  const Row* worst = &rows.front();
  for (const Row& r : rows) {
    if (key(r) > key(*worst)) worst = &r;
  }
  LemmaReport rep;
  rep.lemma = lemma;
  rep.measured = worst->measured;
  rep.bound = worst->bound;
  rep.margin = worst->bound - worst->measured;
  rep.std_error = worst->std_error;
  rep.pass = std::isfinite(rep.margin) ? rep.margin >= -3.0 * rep.std_error : rep.margin > 0.0;
  rep.detail = worst->where;
  return rep;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// Mean and standard error of v over the valid trajectories.
std::pair<double, double> mean_se(const std::vector<double>& v) {
  const double m = mean_of(v);
  if (v.size() < 2) return {m, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  const double n = static_cast<double>(v.size());
  return {m, std::sqrt(ss / (n - 1.0) / n)};
}

}  // namespace

void SweepPlan::validate() const {
  if (eta_grid.size() < 4) throw ConfigurationError("eta_grid needs at least 4 step sizes");
  if (!(horizon_t > 0.0)) throw ConfigurationError("horizon_t must be > 0");
  for (double eta : eta_grid) {
    check_stepsize(eta);
    (void)steps_for_horizon(eta, horizon_t);
  }
  if (n_traj < 2) throw ConfigurationError("n_traj must be >= 2");
  if (n_repeats < 1) throw ConfigurationError("n_repeats must be >= 1");
  if (!synthetic && refinement < 16) throw ConfigurationError("refinement must be >= 16");
  if (synthetic && !(synthetic->first > 0.0)) throw ConfigurationError("synthetic_coeff must be > 0");
}

SlopeFit fit_slope(const std::vector<FitPoint>& points) {
  if (points.size() < 2) throw DataError("slope fit needs at least 2 points");
  bool weighted = true;
  for (const FitPoint& p : points) {
    if (!(p.eta > 0.0) || !(p.value > 0.0) || !std::isfinite(p.value)) {
      throw DataError("slope fit needs positive step sizes and values");
    }
    if (!(p.std_error > 0.0)) weighted = false;
  }
  double sw = 0.0, sx = 0.0, sy = 0.0;
  std::vector<double> w(points.size()), x(points.size()), y(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const FitPoint& p = points[i];
    x[i] = std::log(p.eta);
    y[i] = std::log(p.value);
    w[i] = weighted ? (p.value / p.std_error) * (p.value / p.std_error) : 1.0;
    sw += w[i];
    sx += w[i] * x[i];
    sy += w[i] * y[i];
  }
  const double mx = sx / sw, my = sy / sw;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    sxx += w[i] * (x[i] - mx) * (x[i] - mx);
    sxy += w[i] * (x[i] - mx) * (y[i] - my);
    syy += w[i] * (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw DataError("slope fit needs at least 2 distinct step sizes");
  SlopeFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double r = y[i] - (f.intercept + f.slope * x[i]);
    ss_res += w[i] * r * r;
  }
  f.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  return f;
}

bool RateFit::slope_check() const {
  return n_fit_points >= 4 && fit.slope >= predicted.overall_exponent - kSlopeTolerance;
}

RateFit fit_sweep_points(const std::string& preset, std::vector<SweepPoint> points, const RatePrediction& predicted,
                         std::optional<double> reported) {
  RateFit out;
  out.preset = preset;
  out.predicted = predicted;
  out.reported = reported;

  std::vector<double> order;
  std::map<double, std::vector<const SweepPoint*>> by_eta;
  for (const SweepPoint& p : points) {
    if (!by_eta.count(p.eta)) order.push_back(p.eta);
    by_eta[p.eta].push_back(&p);
  }
  std::vector<FitPoint> fit_points;
  for (double eta : order) {
    const auto& reps = by_eta[eta];
    SweepLevel lv;
    lv.eta = eta;
    lv.s_batch = reps.front()->s_batch;
    std::vector<double> vals;
    double boot = 0.0;
    for (const SweepPoint* p : reps) {
      vals.push_back(p->w2);
      boot += p->std_error;
      lv.floor += p->floor;
      if (!p->warnings.empty() && lv.warnings.find(p->warnings) == std::string::npos) append_warning(lv.warnings, p->warnings);
    }
    const double r = static_cast<double>(reps.size());
    boot /= r;
    lv.floor /= r;
    const auto [m, se_rep] = mean_se(vals);
    lv.value = m;
    lv.std_error = std::max(se_rep, boot / std::sqrt(r));
    // The half-vs-half floor is sqrt(2) above the bias floor of a full-size comparison.
    const double bias_floor = lv.floor / std::sqrt(2.0);
    if (!(lv.value > 3.0 * std::max(lv.std_error, bias_floor))) {
      lv.excluded = true;
      append_warning(lv.warnings, "excluded: W2 below 3x sampling floor");
    } else {
      fit_points.push_back({eta, lv.value, lv.std_error});
    }
    out.levels.push_back(lv);
  }
  for (SweepPoint& p : points) {
    for (const SweepLevel& lv : out.levels) {
      if (lv.eta == p.eta && lv.excluded) append_warning(p.warnings, "excluded: W2 below 3x sampling floor");
    }
  }
  out.points = std::move(points);
  out.n_fit_points = static_cast<int>(fit_points.size());
  if (fit_points.size() < 4) {
    out.warnings.push_back("only " + std::to_string(fit_points.size()) +
                           " step sizes above the sampling floor (need 4)");
  }
  if (fit_points.size() < 2) {
    out.fit.slope = out.fit.intercept = out.fit.r_squared = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  out.fit = fit_slope(fit_points);
  for (const FitPoint& p : fit_points) {
    out.residuals.push_back(std::log(p.value) - (out.fit.intercept + out.fit.slope * std::log(p.eta)));
  }
  return out;
}

RateFit run_sweep(const SweepPlan& plan) {
  plan.validate();
  const std::string preset = to_string(plan.preset);
  std::vector<SweepPoint> points;
  RatePrediction predicted;
  std::optional<double> reported;
  std::vector<std::string> plan_warnings;

  for (std::size_t e = 0; e < plan.eta_grid.size(); ++e) {
    const double eta = plan.eta_grid[e];
    ProblemParams pp = plan.problem;
    pp.eta = eta;
    const ChainSpec spec = plan.make_chain ? plan.make_chain(eta) : make_preset(plan.preset, pp);
    const int chi0 = spec.noise.chi0();
    if (e == 0) {
      predicted = predict_rate(spec.constants, chi0);
      reported = reported_rate(plan.preset, chi0);
    }
    const int s_batch = corollary_batch_size(eta, spec.constants.beta, chi0);

    // Infeasible window thresholds do not stop a sweep; the chain itself is still well defined.
    std::string level_warning;
    try {
      const ConstantsBundle kb = compute_constants(spec.constants, eta, s_batch,
                                                   {spec.x0.data(), static_cast<std::size_t>(spec.dim())}, chi0);
      check_window_thresholds(kb, kb.l_window);
    } catch (const InputError& err) {
      level_warning = std::string("thresholds infeasible: ") + err.what();
    }
    const std::int64_t k_steps = steps_for_horizon(eta, plan.horizon_t);

    for (int r = 0; r < plan.n_repeats; ++r) {
      SweepPoint pt;
      pt.eta = eta;
      pt.s_batch = s_batch;
      pt.n_traj = plan.n_traj;
      pt.repeat = r;
      pt.seed = derive_seed(plan.seed, {static_cast<std::uint64_t>(e), static_cast<std::uint64_t>(r)});
      pt.warnings = level_warning;
      if (plan.synthetic) {
        RngStream s(pt.seed, 0, 0, StreamRole::synthetic);
        const double clean = plan.synthetic->first * std::pow(eta, plan.synthetic->second);
        pt.w2 = clean * std::exp(0.02 * s.normal());
        pt.std_error = 0.02 * clean;
        pt.method = "synthetic";
      } else {
        const Ensemble chain = simulate_ensemble(spec, plan.n_traj, plan.horizon_t, {k_steps},
                                                 RngStream(derive_seed(pt.seed, {1})));
        const Ensemble ref = simulate_reference(DiffusionSpec::from_chain(spec), plan.n_traj, plan.horizon_t,
                                                plan.refinement, RngStream(derive_seed(pt.seed, {2})), {k_steps});
        const W2Estimate est = w2_auto(chain.at(0), ref.at(0), derive_seed(pt.seed, {3}));
        pt.w2 = est.value;
        pt.std_error = est.std_error;
        pt.method = est.method;
        pt.floor = w2_auto(chain.half(0, 0), chain.half(0, 1), derive_seed(pt.seed, {4})).value;
        if (chain.n_diverged + ref.n_diverged > 0) {
          append_warning(pt.warnings, std::to_string(chain.n_diverged + ref.n_diverged) + " diverged");
        }
      }
      points.push_back(std::move(pt));
    }
    if (!level_warning.empty()) plan_warnings.push_back("eta=" + format_double(eta) + ": " + level_warning);
  }
  RateFit fit = fit_sweep_points(preset, std::move(points), predicted, reported);
  fit.warnings.insert(fit.warnings.begin(), plan_warnings.begin(), plan_warnings.end());
  return fit;
}

ConstantsBundle verify_preconditions(const ChainSpec& spec, const VerifyOptions& opts, int& s_batch,
                                     double& l_window, double& l1) {
  const int chi0 = spec.noise.chi0();
  s_batch = opts.s_batch > 0 ? opts.s_batch : corollary_batch_size(spec.eta, spec.constants.beta, chi0);
  const ConstantsBundle k = compute_constants(spec.constants, spec.eta, s_batch,
                                              {spec.x0.data(), static_cast<std::size_t>(spec.dim())}, chi0);
  l_window = opts.l_window > 0.0 ? opts.l_window : k.l_window;
  l1 = opts.l1 > 0.0 ? opts.l1 : k.l1_corrector;
  check_window_thresholds(k, l_window);
  if (l1 < k.l1_main || l1 < k.l1_appendix) {
    throw PreconditionError("corrector threshold violated: L1 = " + format_double(l1) + " < " +
                            format_double(std::max(k.l1_main, k.l1_appendix)));
  }
  if (!(opts.horizon_t > 0.0)) throw ConfigurationError("horizon_t must be > 0");
  if (steps_for_horizon(spec.eta, opts.horizon_t) < s_batch) {
    throw PreconditionError("horizon shorter than one window of S steps");
  }
  if (opts.n_clt < 1000) throw ConfigurationError("n_clt must be >= 1000");
  validate_chain(spec);
  return k;
}

std::vector<LemmaReport> verify_lemmas(const ChainSpec& spec, int n_traj, const VerifyOptions& opts) {
  int s_batch = 1;
  double l_window = 0.0, l1 = 0.0;
  const ConstantsBundle k = verify_preconditions(spec, opts, s_batch, l_window, l1);
  if (n_traj < 2) throw ConfigurationError("n_traj must be >= 2");
  const int d = spec.dim();
  const double eta = spec.eta;
  const std::int64_t k_steps = steps_for_horizon(eta, opts.horizon_t);
  std::vector<LemmaReport> out;

  // Moment and increment bounds from one plain ensemble recorded at every step.
  std::vector<std::int64_t> grid(static_cast<std::size_t>(k_steps) + 1);
  for (std::int64_t g = 0; g <= k_steps; ++g) grid[static_cast<std::size_t>(g)] = g;
  const Ensemble ens = simulate_ensemble(spec, n_traj, opts.horizon_t, grid, RngStream(derive_seed(opts.seed, {1})));
  std::vector<int> live;
  for (int i = 0; i < n_traj; ++i) {
    if (ens.valid[static_cast<std::size_t>(i)]) live.push_back(i);
  }
  auto norm_sq_at = [&](int i, std::size_t g) {
    double s = 0.0;
    for (int c = 0; c < d; ++c) s += ens.value(i, g, c) * ens.value(i, g, c);
    return s;
  };

  std::vector<Row> moment_rows;
  std::vector<double> second(grid.size());
  // Row t = 0 is the identity 1 + |x0|^2 = R^2(0) and is skipped.
  for (std::size_t g = 0; g < grid.size(); ++g) {
    std::vector<double> v;
    v.reserve(live.size());
    for (int i : live) v.push_back(norm_sq_at(i, g));
    const auto [m, se] = mean_se(v);
    second[g] = m;
    if (g == 0) continue;
    const double t = static_cast<double>(grid[g]) * eta;
    moment_rows.push_back({1.0 + m, k.r_sq(t), se, "t=" + format_double(t)});
  }
  out.push_back(worst_row("moment", moment_rows));

  std::vector<Row> inc_rows;
  for (std::int64_t kc = 0; (kc + 1) * s_batch <= k_steps; ++kc) {
    const auto g0 = static_cast<std::size_t>(kc * s_batch);
    for (int j = 1; j <= s_batch; ++j) {
      std::vector<double> v;
      v.reserve(live.size());
      for (int i : live) {
        double s = 0.0;
        for (int c = 0; c < d; ++c) {
          const double diff = ens.value(i, g0 + static_cast<std::size_t>(j), c) - ens.value(i, g0, c);
          s += diff * diff;
        }
        v.push_back(s);
      }
      const auto [m, se] = mean_se(v);
      const double bound = k.c_increment * j * eta * (1.0 + second[g0]);
      inc_rows.push_back({m, bound, se, "k=" + std::to_string(kc) + " i=" + std::to_string(j)});
    }
  }
  out.push_back(worst_row("increment", inc_rows));

  // Window, interpolation and corrector gaps from the coupled cascade.
  CascadeOptions copts;
  copts.refinement = opts.refinement;
  const CascadeReport cas = simulate_interpolation_cascade(spec, s_batch, l_window, l1, n_traj, opts.horizon_t,
                                                           RngStream(derive_seed(opts.seed, {2})), copts);
  for (const char* stage : {"window", "interpolation", "corrector"}) {
    std::vector<Row> rows;
    for (const CascadeRow& r : cas.rows) {
      if (r.stage == stage && r.t > 0.0) rows.push_back({r.gap, r.bound, r.std_error, "t=" + format_double(r.t)});
    }
    out.push_back(worst_row(stage, rows));
  }

  // CLT gap: bounded by M_eps^2 eta^beta and non-increasing in S.
  const double clt_bound = spec.constants.m_eps * spec.constants.m_eps * std::pow(eta, spec.constants.beta);
  std::vector<Row> clt_rows;
  std::ostringstream detail;
  double prev = 0.0, prev_se = 0.0;
  bool decays = true;
  for (int s : {1, 4, 16}) {
    const CltGapEstimate g = estimate_clt_gap(spec.noise, s, opts.n_clt,
                                              derive_seed(opts.seed, {6, static_cast<std::uint64_t>(s)}));
    const double se = std::max(g.std_error, g.floor);
    clt_rows.push_back({g.value, clt_bound, se, "S=" + std::to_string(s)});
    if (s > 1 && g.value > prev + 3.0 * std::max(se, prev_se)) decays = false;
    if (s > 1) detail << ' ';
    detail << "S=" << s << ':' << format_double(g.value);
    prev = g.value;
    prev_se = se;
  }
  LemmaReport clt = worst_row("clt-gap", clt_rows);
  clt.detail = detail.str() + (decays ? "" : " (not non-increasing in S)");
  clt.pass = clt.pass && decays;
  out.push_back(clt);
  return out;
}

std::string sweep_csv(const RateFit& fit, const std::string& preset) {
  std::ostringstream os;
  os << "preset,eta,S,n_traj,repeat,w2,stderr,floor,method,seed,warnings\n";
  for (const SweepPoint& p : fit.points) {
    os << preset << ',' << format_double(p.eta) << ',' << p.s_batch << ',' << p.n_traj << ',' << p.repeat << ','
       << format_double(p.w2) << ',' << format_double(p.std_error) << ',' << format_double(p.floor) << ','
       << p.method << ',' << p.seed << ',' << csv_safe(p.warnings) << '\n';
  }
  return os.str();
}

std::string fit_csv(const RateFit& fit) {
  std::ostringstream os;
  os << "preset,slope,intercept,r2,predicted_theta,predicted_overall,reported_rate,n_points,slope_check\n";
  os << fit.preset << ',' << format_double(fit.fit.slope) << ',' << format_double(fit.fit.intercept) << ','
     << format_double(fit.fit.r_squared) << ',' << format_double(fit.predicted.theta) << ','
     << format_double(fit.predicted.overall_exponent) << ','
     << (fit.reported ? format_double(*fit.reported) : std::string("na")) << ',' << fit.n_fit_points << ','
     << (fit.slope_check() ? "pass" : "fail") << '\n';
  return os.str();
}

std::string lemmas_csv(const std::vector<LemmaReport>& reports) {
  std::ostringstream os;
  os << "lemma,measured,bound,margin,pass,stderr,detail\n";
  for (const LemmaReport& r : reports) {
    os << r.lemma << ',' << format_double(r.measured) << ',' << format_double(r.bound) << ','
       << format_double(r.margin) << ',' << (r.pass ? "true" : "false") << ',' << format_double(r.std_error) << ','
       << csv_safe(r.detail) << '\n';
  }
  return os.str();
}

std::string constants_csv(const ConstantsBundle& k, const RatePrediction& r) {
  std::ostringstream os;
  os << "name,value\n";
  auto row = [&](const char* n, double v) { os << n << ',' << format_double(v) << '\n'; };
  row("eta", k.eta);
  row("S", k.s_batch);
  row("chi0", k.chi0);
  row("M_sq", k.m_sq);
  row("C", k.c_growth);
  row("C_prime", k.c_increment);
  row("C_dprime", k.c_window);
  row("L", k.l_window);
  row("L_main", k.l_window_main);
  row("L_appendix", k.l_window_appendix);
  row("L1", k.l1_corrector);
  row("L1_main", k.l1_main);
  row("L1_appendix", k.l1_appendix);
  row("C2", k.c2);
  row("C3", k.c3);
  row("C4", k.c4);
  row("C5", k.c5);
  row("C6", k.c6);
  row("C_W_scale", k.c_w_scale);
  row("theta", r.theta);
  row("secondary_exponent", r.secondary_exponent);
  row("overall_exponent", r.overall_exponent);
  return os.str();
}

std::string render_sweep_svg(const std::string& sweep_csv_text, const std::string& fit_csv_text) {
  const CsvTable sweep = parse_csv(sweep_csv_text);
  const CsvTable fit = parse_csv(fit_csv_text);
  const int c_eta = sweep.column("eta"), c_w2 = sweep.column("w2");
  if (c_eta < 0 || c_w2 < 0) throw DataError("sweep csv lacks eta/w2 columns");
  std::vector<std::pair<double, double>> pts;
  for (const auto& row : sweep.rows) {
    const double e = std::stod(row[static_cast<std::size_t>(c_eta)]);
    const double w = std::stod(row[static_cast<std::size_t>(c_w2)]);
    if (e > 0.0 && w > 0.0) pts.emplace_back(std::log10(e), std::log10(w));
  }
  if (pts.empty()) throw DataError("sweep csv has no positive points");
  double x0 = pts[0].first, x1 = x0, y0 = pts[0].second, y1 = y0;
  for (const auto& [x, y] : pts) {
    x0 = std::min(x0, x);
    x1 = std::max(x1, x);
    y0 = std::min(y0, y);
    y1 = std::max(y1, y);
  }
  double slope = std::numeric_limits<double>::quiet_NaN(), icpt = 0.0;
  if (!fit.rows.empty() && fit.column("slope") >= 0) {
    slope = std::stod(fit.rows[0][static_cast<std::size_t>(fit.column("slope"))]);
    icpt = std::stod(fit.rows[0][static_cast<std::size_t>(fit.column("intercept"))]);
  }
  const double pad = 0.1;
  x0 -= pad;
  x1 += pad;
  y0 -= pad;
  y1 += pad;
  const double w = 640, h = 420, ml = 70, mr = 20, mt = 20, mb = 50;
  auto px = [&](double x) { return ml + (x - x0) / (x1 - x0) * (w - ml - mr); };
  auto py = [&](double y) { return h - mb - (y - y0) / (y1 - y0) * (h - mt - mb); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << w - ml - mr << "\" height=\"" << h - mt - mb
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  os << "<clipPath id=\"plot\"><rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << w - ml - mr
     << "\" height=\"" << h - mt - mb << "\"/></clipPath>\n";
  for (int p = static_cast<int>(std::ceil(x0)); p <= static_cast<int>(std::floor(x1)); ++p) {
    os << "<text x=\"" << px(p) << "\" y=\"" << h - mb + 18 << "\" font-size=\"12\" text-anchor=\"middle\">1e"
       << p << "</text>\n";
  }
  for (int p = static_cast<int>(std::ceil(y0)); p <= static_cast<int>(std::floor(y1)); ++p) {
    os << "<text x=\"" << ml - 6 << "\" y=\"" << py(p) + 4 << "\" font-size=\"12\" text-anchor=\"end\">1e" << p
       << "</text>\n";
  }
  os << "<text x=\"" << (ml + w - mr) / 2 << "\" y=\"" << h - 10 << "\" font-size=\"13\" text-anchor=\"middle\">eta</text>\n";
  os << "<text x=\"16\" y=\"" << (mt + h - mb) / 2 << "\" font-size=\"13\" transform=\"rotate(-90 16 "
     << (mt + h - mb) / 2 << ")\" text-anchor=\"middle\">W2</text>\n";
  for (const auto& [x, y] : pts) {
    os << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"3\" fill=\"steelblue\"/>\n";
  }
  if (std::isfinite(slope)) {
    // The fit is in natural logs; in log10 space the slope is unchanged and the intercept scales.
    const double b10 = icpt / std::log(10.0);
    os << "<line x1=\"" << px(x0) << "\" y1=\"" << py(b10 + slope * x0) << "\" x2=\"" << px(x1) << "\" y2=\""
       << py(b10 + slope * x1) << "\" stroke=\"firebrick\" clip-path=\"url(#plot)\"/>\n";
    os << "<text x=\"" << ml + 10 << "\" y=\"" << mt + 16 << "\" font-size=\"13\">slope " << format_double(slope)
       << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace itolab
