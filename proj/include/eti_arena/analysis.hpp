#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "eti_arena/experiment.hpp"
#include "eti_arena/traits.hpp"

namespace eti {

inline constexpr std::string_view kIntercept = "intercept";
// Likert midpoint used for N/A ratings.
inline constexpr double kImputedRating = 4.0;

struct Observation {
  std::string run_id;
  int profile_round = 0;
  int event_round = 0;
};

struct FeatureMatrix {
  std::vector<std::string> names;
  Eigen::MatrixXd values;  // rows: observations
  // One column per trait (trait order); true where the rating was N/A.
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> na_mask;
  std::vector<Observation> observations;

  Eigen::Index column(std::string_view name) const;  // -1 if absent
};

// Name of an interaction column, e.g. "maliciousness×execution_ability".
std::string interaction_name(Trait a, Trait b);

struct LogisticOptions {
  double ridge = 1e-6;  // L2 penalty on every non-intercept coefficient
  double tol = 1e-8;
  int max_iter = 100;
};

// Defaults for the cross-validated robustness classifiers.
inline constexpr LogisticOptions kClassifierDefaults{1.0, 1e-8, 100};

struct LogisticFit {
  std::vector<std::string> names;
  Eigen::VectorXd coefficients;
  Eigen::VectorXd std_errors;  // from the inverse penalized Hessian
  bool converged = false;
  int iterations = 0;
  double log_likelihood = 0.0;

  double coefficient(std::string_view name) const;
  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;  // probabilities
};

// Ridge-penalized IRLS (Newton with step halving). Converged when the largest
// coefficient step falls below tol.
// DomainError: size mismatch or a single label class. SingularDesign: rank-
// deficient design without ridge. NonConvergence: max_iter exhausted or
// coefficients diverging (e.g. separation with ridge = 0).
LogisticFit logistic_fit(const FeatureMatrix& x, const std::vector<bool>& y,
                         const LogisticOptions& opts = {});
LogisticFit logistic_fit(const Eigen::MatrixXd& x,
                         std::vector<std::string> names,
                         const std::vector<bool>& y,
                         const LogisticOptions& opts = {});

// Penalized log-likelihood and its gradient (for verification).
double penalized_log_likelihood(const Eigen::MatrixXd& x,
                                const std::vector<bool>& y,
                                const Eigen::VectorXd& beta,
                                const std::vector<std::string>& names,
                                double ridge);
Eigen::VectorXd penalized_gradient(const Eigen::MatrixXd& x,
                                   const std::vector<bool>& y,
                                   const Eigen::VectorXd& beta,
                                   const std::vector<std::string>& names,
                                   double ridge);

// Mann-Whitney form; ties count one half. DomainError on a single class.
double auc(std::span<const double> scores, const std::vector<bool>& labels);

struct CvScores {
  double mean_auc = 0.0;
  double mean_f1 = 0.0;
  std::vector<int> fold_of;  // fold index per row
  std::vector<double> fold_auc;
  std::vector<double> fold_f1;
};

// Stratified k-fold; F1 at predicted probability 0.5. A split that leaves a
// fold without both classes is redrawn once with a new seed, then throws.
CvScores cross_validated_scores(const Eigen::MatrixXd& x,
                                const std::vector<std::string>& names,
                                const std::vector<bool>& y, int k,
                                std::uint64_t seed,
                                const LogisticOptions& opts = kClassifierDefaults);

enum class TargetEvent { NextDefect, NextCooperate, NextOptimal };
TargetEvent parse_target(std::string_view name);
std::string_view to_string(TargetEvent t) noexcept;

// One observation per (run, round t) with a profile snapshot and a round t+1;
// features are the ratings used at round t, the label is the event at t+1.
// DomainError when no observation exists (e.g. baseline runs).
std::pair<FeatureMatrix, std::vector<bool>> build_features(
    std::span<const RunLog> runs, TargetEvent target,
    const std::vector<std::pair<Trait, Trait>>& interactions = {});

struct CoefficientRow {
  std::string name;
  double estimate;
  double std_error;
  double z;
  double p;
  bool significant;  // Wald p < 0.05
};
std::vector<CoefficientRow> coefficient_table(const LogisticFit& fit);
std::string format_report(const LogisticFit& fit, std::string_view target);
std::string report_csv(const LogisticFit& fit, std::string_view target);

}  // namespace eti
