#include "scan/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "scan/error.hpp"
#include "scan/rng.hpp"

namespace scan {

double gradcheck_relative_error(double analytic, double numeric) {
  const double denom = std::max({1.0, std::fabs(analytic), std::fabs(numeric)});
  return std::fabs(analytic - numeric) / denom;
}

namespace {

double evaluate(const ObjectiveBuilder& build, const std::vector<CheckParam>& params) {
  Graph g;
  std::vector<VarId> leaves;
  leaves.reserve(params.size());
  for (const CheckParam& p : params) leaves.push_back(g.leaf(*p.tensor, true));
  VarId root = build(g, leaves);
  return g.scalar_value(root);
}

}  // namespace

GradCheckReport finite_difference_check(const ObjectiveBuilder& build,
                                        const std::vector<CheckParam>& params,
                                        const GradCheckOptions& opts) {
  if (!(opts.step > 0.0) || opts.step > 1e-2)
    throw ContractError("finite_difference_check: step must lie in (0, 1e-2], got " +
                        std::to_string(opts.step));

  // Analytic pass: one graph, one backward.
  Graph g;
  std::vector<VarId> leaves;
  leaves.reserve(params.size());
  for (const CheckParam& p : params) leaves.push_back(g.leaf(*p.tensor, true));
  VarId root = build(g, leaves);
  if (g.value(root).numel() != 1)
    throw ContractError("finite_difference_check: objective must be scalar, got " +
                        g.value(root).shape_str());
  g.backward(root);

  GradCheckReport report;
  report.step = opts.step;
  report.sample_seed = opts.sample_seed;
  auto rng = make_engine(opts.sample_seed);

  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    const Tensor analytic = g.grad(leaves[pi]);
    Tensor& theta = *params[pi].tensor;

    std::vector<std::size_t> coords(theta.numel());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (opts.max_coords_per_param > 0 && coords.size() > opts.max_coords_per_param) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(opts.max_coords_per_param);
      std::sort(coords.begin(), coords.end());
      report.sampled = true;
    }

    GradCheckEntry entry;
    entry.name = params[pi].name;
    for (std::size_t c : coords) {
      const double saved = theta[c];
      theta[c] = saved + opts.step;
      const double f_plus = evaluate(build, params);
      theta[c] = saved - opts.step;
      const double f_minus = evaluate(build, params);
      theta[c] = saved;
      const double numeric = (f_plus - f_minus) / (2.0 * opts.step);
      const double rel = gradcheck_relative_error(analytic[c], numeric);
      if (rel >= entry.max_rel_error) {
        entry.max_rel_error = rel;
        entry.worst_coord = c;
        entry.analytic_at_worst = analytic[c];
        entry.numeric_at_worst = numeric;
      }
      ++entry.coords_checked;
    }
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.per_param.push_back(std::move(entry));
  }

  report.passed = report.max_rel_error <= opts.tolerance;
  return report;
}

std::string GradCheckReport::to_string() const {
  std::ostringstream os;
  os << "gradient check: h=" << step << " max_rel_error=" << max_rel_error
     << (passed ? " PASS" : " FAIL");
  if (sampled) os << " (sampled, seed=" << sample_seed << ")";
  os << '\n';
  for (const GradCheckEntry& e : per_param)
    os << "  " << e.name << ": coords=" << e.coords_checked
       << " max_rel_error=" << e.max_rel_error << " worst[" << e.worst_coord
       << "] analytic=" << e.analytic_at_worst << " numeric=" << e.numeric_at_worst << '\n';
  return os.str();
}

}  // namespace scan
