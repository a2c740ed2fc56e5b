#include "gravis/analysis.hpp"

#include <cmath>
#include <fstream>
#include <string>

#include "gravis/errors.hpp"

namespace gravis {

SimilarityMatrix OrderedExample::matrix() const {
  SimilarityMatrix m(7);
  for (std::size_t i = 0; i < 7; ++i) m.at(i, i) = 1.0;
  for (std::size_t v = 0; v < 6; ++v) {
    m.at(0, v + 1) = sims[v];
    m.at(v + 1, 0) = sims[v];
  }
  return m;
}

std::vector<GroupId> OrderedExample::groups() const {
  // Ranks {1,3,6} share the anchor's source; {2,4,5} come from another.
  return {0, 0, 1, 0, 1, 1, 0};
}

OrderedExample ordered_example(double base, double c) {
  if (c < 0.0) throw OutOfRange("adjacent gap C must be nonnegative");
  if (base > 1.0 || base - 5.0 * c < -1.0)
    throw OutOfRange("ordered example similarities leave [-1, 1] for base " +
                     std::to_string(base) + ", C " + std::to_string(c));
  OrderedExample ex;
  ex.base = base;
  ex.gap_c = c;
  ex.sims.resize(6);
  for (std::size_t k = 0; k < 6; ++k) ex.sims[k] = base - static_cast<double>(k) * c;
  return ex;
}

std::vector<CurvePoint> gradient_gap_curve(double tau, bool attention,
                                           const std::vector<double>& c_grid,
                                           double base) {
  VglConfig cfg;
  cfg.tau = tau;
  cfg.attention_enabled = attention;
  std::vector<CurvePoint> out;
  out.reserve(c_grid.size());
  for (double c : c_grid) {
    const OrderedExample ex = ordered_example(base, c);
    const SimilarityMatrix m = ex.matrix();
    const std::vector<GroupId> g = ex.groups();
    const std::vector<double> grad =
        vgl_grad_sims(OrderedExample::anchor_index, m, g, cfg);
    CurvePoint p;
    p.gap = 3.0 * c;
    p.value = std::abs(grad[OrderedExample::rank3_index]) -
              std::abs(grad[OrderedExample::rank6_index]);
    out.push_back(p);
  }
  return out;
}

std::vector<CurvePoint> loss_gap_curve(double tau, bool attention,
                                       const std::vector<double>& c_grid,
                                       double base) {
  VglConfig cfg;
  cfg.tau = tau;
  cfg.attention_enabled = attention;
  std::vector<CurvePoint> out;
  out.reserve(c_grid.size());
  for (double c : c_grid) {
    const OrderedExample ex = ordered_example(base, c);
    CurvePoint p;
    p.gap = 3.0 * c;
    p.value = vgl_anchor(OrderedExample::anchor_index, ex.matrix(), ex.groups(), cfg);
    out.push_back(p);
  }
  return out;
}

std::vector<CurvePoint> sigmoid_margin_curve(double tau,
                                             const std::vector<double>& sim_grid,
                                             double reference_positive) {
  std::vector<CurvePoint> out;
  out.reserve(sim_grid.size());
  for (double s : sim_grid) {
    if (s < -1.0 || s > 1.0)
      throw OutOfRange("swept similarity " + std::to_string(s) + " outside [-1,1]");
    out.push_back({s, tempered_sigmoid(s - reference_positive, tau)});
  }
  return out;
}

std::vector<TauSweepRow> tau_sweep(const std::vector<double>& taus,
                                   bool attention,
                                   const std::vector<double>& c_grid,
                                   double base) {
  if (taus.empty()) throw InvalidTemperature("tau sweep needs at least one value");
  std::vector<TauSweepRow> rows;
  rows.reserve(taus.size() * c_grid.size());
  for (double tau : taus) {
    if (!(tau > 0.0))
      throw InvalidTemperature("tau must be > 0, got " + std::to_string(tau));
    for (const CurvePoint& p : gradient_gap_curve(tau, attention, c_grid, base))
      rows.push_back({tau, p.gap, p.value});
  }
  return rows;
}

std::vector<double> default_c_grid() {
  std::vector<double> grid;
  for (int k = 1; k <= 30; ++k) grid.push_back(0.005 * k);
  return grid;
}

std::vector<double> default_tau_grid() { return {0.01, 0.1, 0.2, 0.5, 1.0}; }

namespace {

void write_rows(std::ofstream& out, const std::vector<CurvePoint>& curve) {
  out.precision(17);
  for (const CurvePoint& p : curve) out << p.gap << "," << p.value << "\n";
}

}  // namespace

void write_curve_csv(const std::vector<CurvePoint>& curve,
                     const std::string& header, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoFailure("cannot open " + path + " for writing");
  out << header << "\n";
  write_rows(out, curve);
  if (!out) throw IoFailure("short write to " + path);
}

void write_tau_sweep_csv(const std::vector<TauSweepRow>& rows,
                         const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoFailure("cannot open " + path + " for writing");
  out << "tau,gap,grad_diff\n";
  out.precision(17);
  for (const TauSweepRow& r : rows)
    out << r.tau << "," << r.gap << "," << r.grad_diff << "\n";
  if (!out) throw IoFailure("short write to " + path);
}

double total_variation(const std::vector<CurvePoint>& curve) {
  double tv = 0.0;
  for (std::size_t k = 1; k < curve.size(); ++k)
    tv += std::abs(curve[k].value - curve[k - 1].value);
  return tv;
}

}  // namespace gravis
