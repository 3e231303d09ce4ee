#include "eti_arena/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "eti_arena/errors.hpp"
#include "eti_arena/metrics.hpp"
#include "eti_arena/oracle.hpp"
#include "eti_arena/rng.hpp"

namespace eti {

Eigen::Index FeatureMatrix::column(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<Eigen::Index>(i);
  }
  return -1;
}

std::string interaction_name(Trait a, Trait b) {
  return std::string(trait_key(a)) + "×" + std::string(trait_key(b));
}

// ---- logistic regression ----------------------------------------------------

namespace {

Eigen::VectorXd penalty_mask(const std::vector<std::string>& names) {
  Eigen::VectorXd m = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(names.size()));
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == kIntercept) m(static_cast<Eigen::Index>(i)) = 0.0;
  }
  return m;
}

Eigen::VectorXd labels_vector(const std::vector<bool>& y) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(y.size()));
  for (std::size_t i = 0; i < y.size(); ++i) v(static_cast<Eigen::Index>(i)) = y[i] ? 1.0 : 0.0;
  return v;
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + e^z) without overflow.
double softplus(double z) {
  return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double log_likelihood(const Eigen::VectorXd& eta, const Eigen::VectorXd& y) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) ll += y(i) * eta(i) - softplus(eta(i));
  return ll;
}

void check_shapes(const Eigen::MatrixXd& x, const std::vector<std::string>& names,
                  const std::vector<bool>& y) {
  if (x.rows() != static_cast<Eigen::Index>(y.size())) {
    throw DomainError("design rows and label count differ");
  }
  if (x.cols() != static_cast<Eigen::Index>(names.size())) {
    throw DomainError("design columns and feature names differ");
  }
}

double normal_two_sided_p(double z) { return std::erfc(std::fabs(z) / std::sqrt(2.0)); }

}  // namespace

double penalized_log_likelihood(const Eigen::MatrixXd& x, const std::vector<bool>& y,
                                const Eigen::VectorXd& beta,
                                const std::vector<std::string>& names, double ridge) {
  check_shapes(x, names, y);
  const Eigen::VectorXd mask = penalty_mask(names);
  const Eigen::VectorXd eta = x * beta;
  return log_likelihood(eta, labels_vector(y)) -
         0.5 * ridge * (mask.array() * beta.array().square()).sum();
}

Eigen::VectorXd penalized_gradient(const Eigen::MatrixXd& x, const std::vector<bool>& y,
                                   const Eigen::VectorXd& beta,
                                   const std::vector<std::string>& names, double ridge) {
  check_shapes(x, names, y);
  const Eigen::VectorXd mask = penalty_mask(names);
  const Eigen::VectorXd eta = x * beta;
  Eigen::VectorXd p(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) p(i) = sigmoid(eta(i));
  return x.transpose() * (labels_vector(y) - p) -
         ridge * (mask.array() * beta.array()).matrix();
}

LogisticFit logistic_fit(const FeatureMatrix& x, const std::vector<bool>& y,
                         const LogisticOptions& opts) {
  return logistic_fit(x.values, x.names, y, opts);
}

LogisticFit logistic_fit(const Eigen::MatrixXd& x, std::vector<std::string> names,
                         const std::vector<bool>& y, const LogisticOptions& opts) {
  check_shapes(x, names, y);
  if (opts.ridge < 0 || opts.tol <= 0 || opts.max_iter < 1) {
    throw DomainError("invalid logistic options");
  }
  const auto positives = std::count(y.begin(), y.end(), true);
  if (positives == 0 || positives == static_cast<long>(y.size())) {
    throw DomainError("logistic fit needs both label classes");
  }
  if (opts.ridge == 0.0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    if (qr.rank() < x.cols()) {
      throw SingularDesign("design matrix is rank deficient");
    }
  }

  const Eigen::Index p = x.cols();
  const Eigen::VectorXd mask = penalty_mask(names);
  const Eigen::VectorXd yv = labels_vector(y);
  const auto objective = [&](const Eigen::VectorXd& b) {
    return log_likelihood(x * b, yv) -
           0.5 * opts.ridge * (mask.array() * b.array().square()).sum();
  };

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  double current = objective(beta);
  LogisticFit fit;
  fit.names = std::move(names);
  Eigen::MatrixXd hessian(p, p);

  for (int iter = 1; iter <= opts.max_iter; ++iter) {
    const Eigen::VectorXd eta = x * beta;
    Eigen::VectorXd prob(eta.size());
    Eigen::VectorXd w(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      prob(i) = sigmoid(eta(i));
      w(i) = prob(i) * (1.0 - prob(i));
    }
    const Eigen::VectorXd grad =
        x.transpose() * (yv - prob) - opts.ridge * (mask.array() * beta.array()).matrix();
    hessian = x.transpose() * w.asDiagonal() * x;
    hessian.diagonal() += opts.ridge * mask;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(hessian);
    const Eigen::VectorXd pivots = ldlt.vectorD();
    const bool degenerate =
        pivots.minCoeff() <= 1e-12 * std::max(1.0, pivots.cwiseAbs().maxCoeff());
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || degenerate) {
      // Weights that vanish after the first step mean fitted probabilities
      // saturated at 0 or 1.
      if (iter > 1) throw NonConvergence("coefficients diverge; the classes may be separable");
      throw SingularDesign("information matrix is not positive definite");
    }
    Eigen::VectorXd step = ldlt.solve(grad);
    if (!step.allFinite()) {
      throw NonConvergence("IRLS step is not finite");
    }

    double scale = 1.0;
    Eigen::VectorXd next = beta + step;
    double value = objective(next);
    for (int h = 0; h < 30 && !(value >= current - 1e-12 * std::fabs(current)); ++h) {
      scale *= 0.5;
      next = beta + scale * step;
      value = objective(next);
    }
    const double max_step = (scale * step).cwiseAbs().maxCoeff();
    beta = next;
    current = value;
    fit.iterations = iter;
    if (!beta.allFinite() || beta.cwiseAbs().maxCoeff() > 1e8) {
      throw NonConvergence("coefficients diverge; the classes may be separable");
    }
    if (max_step < opts.tol) {
      fit.converged = true;
      break;
    }
  }
  if (!fit.converged) {
    throw NonConvergence("IRLS did not converge in " + std::to_string(opts.max_iter) +
                         " iterations");
  }

  const Eigen::VectorXd eta = x * beta;
  Eigen::VectorXd w(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double pr = sigmoid(eta(i));
    w(i) = pr * (1.0 - pr);
  }
  hessian = x.transpose() * w.asDiagonal() * x;
  hessian.diagonal() += opts.ridge * mask;
  const Eigen::MatrixXd cov = hessian.ldlt().solve(Eigen::MatrixXd::Identity(p, p));
  fit.coefficients = beta;
  fit.std_errors = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  fit.log_likelihood = log_likelihood(eta, yv);
  return fit;
}

double LogisticFit::coefficient(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return coefficients(static_cast<Eigen::Index>(i));
  }
  throw DomainError("no coefficient named '" + std::string(name) + "'");
}

Eigen::VectorXd LogisticFit::predict(const Eigen::MatrixXd& x) const {
  if (x.cols() != coefficients.size()) {
    throw DomainError("feature count does not match the fit");
  }
  Eigen::VectorXd eta = x * coefficients;
  for (Eigen::Index i = 0; i < eta.size(); ++i) eta(i) = sigmoid(eta(i));
  return eta;
}

// ---- AUC and cross-validation -----------------------------------------------

double auc(std::span<const double> scores, const std::vector<bool>& labels) {
  if (scores.size() != labels.size()) throw DomainError("scores and labels differ in length");
  const auto n = scores.size();
  const double n_pos = static_cast<double>(std::count(labels.begin(), labels.end(), true));
  const double n_neg = static_cast<double>(n) - n_pos;
  if (n_pos == 0 || n_neg == 0) throw DomainError("AUC needs both label classes");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Midranks give ties one half.
  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double midrank = (static_cast<double>(i + j) / 2.0) + 1.0;
    for (std::size_t k = i; k <= j; ++k) {
      if (labels[order[k]]) rank_sum += midrank;
    }
    i = j + 1;
  }
  return (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

namespace {

std::vector<int> stratified_folds(const std::vector<bool>& y, int k, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::size_t> pos;
  std::vector<std::size_t> neg;
  for (std::size_t i = 0; i < y.size(); ++i) (y[i] ? pos : neg).push_back(i);
  const auto shuffle = [&](std::vector<std::size_t>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(i));
      std::swap(v[i - 1], v[std::min(j, i - 1)]);
    }
  };
  shuffle(pos);
  shuffle(neg);
  std::vector<int> fold(y.size());
  int next = 0;
  for (const auto* group : {&pos, &neg}) {
    for (auto idx : *group) {
      fold[idx] = next;
      next = (next + 1) % k;
    }
  }
  return fold;
}

bool folds_balanced(const std::vector<bool>& y, const std::vector<int>& fold, int k) {
  std::vector<int> pos(static_cast<std::size_t>(k), 0);
  std::vector<int> neg(static_cast<std::size_t>(k), 0);
  for (std::size_t i = 0; i < y.size(); ++i) {
    (y[i] ? pos : neg)[static_cast<std::size_t>(fold[i])]++;
  }
  const int total_pos = std::accumulate(pos.begin(), pos.end(), 0);
  const int total_neg = std::accumulate(neg.begin(), neg.end(), 0);
  for (std::size_t f = 0; f < pos.size(); ++f) {
    if (pos[f] == 0 || neg[f] == 0) return false;
    if (total_pos - pos[f] == 0 || total_neg - neg[f] == 0) return false;
  }
  return true;
}

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& x, const std::vector<std::size_t>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

}  // namespace

CvScores cross_validated_scores(const Eigen::MatrixXd& x,
                                const std::vector<std::string>& names,
                                const std::vector<bool>& y, int k, std::uint64_t seed,
                                const LogisticOptions& opts) {
  check_shapes(x, names, y);
  if (k < 2) throw DomainError("k must be at least 2");
  if (static_cast<std::size_t>(k) > y.size()) {
    throw DomainError("k exceeds the number of observations");
  }
  auto fold = stratified_folds(y, k, seed);
  if (!folds_balanced(y, fold, k)) {
    fold = stratified_folds(y, k, derive_seed(seed, 1));
    if (!folds_balanced(y, fold, k)) {
      throw DomainError("a fold lacks one of the label classes");
    }
  }

  CvScores out;
  out.fold_of = fold;
  for (int f = 0; f < k; ++f) {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
    for (std::size_t i = 0; i < y.size(); ++i) (fold[i] == f ? test : train).push_back(i);
    std::vector<bool> y_train;
    std::vector<bool> y_test;
    for (auto i : train) y_train.push_back(y[i]);
    for (auto i : test) y_test.push_back(y[i]);
    const auto fit = logistic_fit(select_rows(x, train), names, y_train, opts);
    const Eigen::VectorXd prob = fit.predict(select_rows(x, test));
    const std::vector<double> scores(prob.data(), prob.data() + prob.size());
    out.fold_auc.push_back(auc(scores, y_test));
    ConfusionCounts c;
    for (std::size_t i = 0; i < scores.size(); ++i) c.add(scores[i] >= 0.5, y_test[i]);
    out.fold_f1.push_back(c.f1());
  }
  out.mean_auc = std::accumulate(out.fold_auc.begin(), out.fold_auc.end(), 0.0) / k;
  out.mean_f1 = std::accumulate(out.fold_f1.begin(), out.fold_f1.end(), 0.0) / k;
  return out;
}

// ---- features from run logs -------------------------------------------------

TargetEvent parse_target(std::string_view name) {
  std::string n(name);
  std::replace(n.begin(), n.end(), '-', '_');
  if (n == "next_defect") return TargetEvent::NextDefect;
  if (n == "next_cooperate") return TargetEvent::NextCooperate;
  if (n == "next_optimal") return TargetEvent::NextOptimal;
  throw DomainError("unknown target event '" + std::string(name) +
                    "' (next_defect, next_cooperate, next_optimal)");
}

std::string_view to_string(TargetEvent t) noexcept {
  switch (t) {
    case TargetEvent::NextDefect:
      return "next_defect";
    case TargetEvent::NextCooperate:
      return "next_cooperate";
    case TargetEvent::NextOptimal:
      return "next_optimal";
  }
  return "next_defect";
}

std::pair<FeatureMatrix, std::vector<bool>> build_features(
    std::span<const RunLog> runs, TargetEvent target,
    const std::vector<std::pair<Trait, Trait>>& interactions) {
  struct Row {
    std::array<std::optional<int>, kTraitCount> ratings;
    Observation obs;
    bool label;
  };
  std::vector<Row> rows;
  for (const auto& run : runs) {
    if (!run.complete()) continue;
    const auto table = PayoffTable::standard(run.config.game);
    for (std::size_t i = 0; i + 1 < run.rounds.size(); ++i) {
      const auto& now = run.rounds[i];
      const auto& next = run.rounds[i + 1];
      if (!now.profile_snapshot || next.round != now.round + 1) continue;
      Row row;
      for (std::size_t t = 0; t < kTraitCount; ++t) {
        row.ratings[t] = now.profile_snapshot->ratings[t].value;
      }
      row.obs = {run.run_id, now.profile_snapshot->produced_at_round, next.round};
      switch (target) {
        case TargetEvent::NextDefect:
          row.label = !is_cooperative(next.agent_action);
          break;
        case TargetEvent::NextCooperate:
          row.label = is_cooperative(next.agent_action);
          break;
        case TargetEvent::NextOptimal:
          row.label = next.agent_action ==
                      best_response(table, run.config.schedule.policy_at(next.round));
          break;
      }
      rows.push_back(std::move(row));
    }
  }
  if (rows.empty()) {
    throw DomainError("no observations: the runs carry no profile snapshots");
  }

  std::array<bool, kTraitCount> any_na{};
  for (const auto& r : rows) {
    for (std::size_t t = 0; t < kTraitCount; ++t) any_na[t] = any_na[t] || !r.ratings[t];
  }

  FeatureMatrix fm;
  fm.names.emplace_back(kIntercept);
  for (std::size_t t = 0; t < kTraitCount; ++t) {
    fm.names.emplace_back(trait_key(static_cast<Trait>(t)));
  }
  for (std::size_t t = 0; t < kTraitCount; ++t) {
    if (any_na[t]) fm.names.push_back(std::string(trait_key(static_cast<Trait>(t))) + "_na");
  }
  for (const auto& [a, b] : interactions) {
    auto name = interaction_name(a, b);
    if (std::find(fm.names.begin(), fm.names.end(), name) != fm.names.end()) {
      throw DomainError("duplicate interaction '" + name + "'");
    }
    fm.names.push_back(std::move(name));
  }

  const auto n = static_cast<Eigen::Index>(rows.size());
  fm.values.resize(n, static_cast<Eigen::Index>(fm.names.size()));
  fm.na_mask.resize(n, static_cast<Eigen::Index>(kTraitCount));
  std::vector<bool> labels;
  labels.reserve(rows.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    Eigen::Index c = 0;
    fm.values(i, c++) = 1.0;
    std::array<double, kTraitCount> v{};
    for (std::size_t t = 0; t < kTraitCount; ++t) {
      v[t] = r.ratings[t] ? static_cast<double>(*r.ratings[t]) : kImputedRating;
      fm.values(i, c++) = v[t];
      fm.na_mask(i, static_cast<Eigen::Index>(t)) = !r.ratings[t];
    }
    for (std::size_t t = 0; t < kTraitCount; ++t) {
      if (any_na[t]) fm.values(i, c++) = r.ratings[t] ? 0.0 : 1.0;
    }
    for (const auto& [a, b] : interactions) {
      fm.values(i, c++) = v[index_of(a)] * v[index_of(b)];
    }
    fm.observations.push_back(r.obs);
    labels.push_back(r.label);
  }
  return {std::move(fm), std::move(labels)};
}

// ---- reports ----------------------------------------------------------------

std::vector<CoefficientRow> coefficient_table(const LogisticFit& fit) {
  std::vector<CoefficientRow> rows;
  for (std::size_t i = 0; i < fit.names.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    const double se = fit.std_errors(k);
    const double z = se > 0 ? fit.coefficients(k) / se : 0.0;
    const double p = se > 0 ? normal_two_sided_p(z) : 1.0;
    rows.push_back({fit.names[i], fit.coefficients(k), se, z, p, p < 0.05});
  }
  return rows;
}

std::string format_report(const LogisticFit& fit, std::string_view target) {
  std::ostringstream out;
  out << "Logistic regression, target: " << target << "\n";
  out << "iterations " << fit.iterations << ", log-likelihood " << fit.log_likelihood
      << "\n\n";
  char line[160];
  std::snprintf(line, sizeof line, "%-40s %10s %10s %8s %10s\n", "feature", "coef", "se",
                "z", "p");
  out << line;
  for (const auto& r : coefficient_table(fit)) {
    std::snprintf(line, sizeof line, "%-40s %10.4f %10.4f %8.3f %10.4g %s\n",
                  r.name.c_str(), r.estimate, r.std_error, r.z, r.p,
                  r.significant ? "*" : "");
    out << line;
  }
  out << "\n* Wald p < 0.05\n";
  return out.str();
}

std::string report_csv(const LogisticFit& fit, std::string_view target) {
  std::ostringstream out;
  out.precision(10);
  out << "target,feature,coefficient,std_error,z,p,significant\n";
  for (const auto& r : coefficient_table(fit)) {
    out << target << ',' << r.name << ',' << r.estimate << ',' << r.std_error << ','
        << r.z << ',' << r.p << ',' << (r.significant ? 1 : 0) << '\n';
  }
  return out.str();
}

}  // namespace eti
