#pragma once

#include <string>
#include <vector>

#include "gravis/vgl.hpp"

namespace gravis {

// Six views at constant adjacent similarity gap C, positives at ranks
// 1, 3 and 6, negatives at ranks 2, 4 and 5.
struct OrderedExample {
  std::vector<double> sims;  // size 6, descending: base, base-C, ..., base-5C
  double base = 0.9;
  double gap_c = 0.0;

  // Similarity matrix with the anchor at index 0 and the six views after it,
  // plus the matching group labels (anchor group, positives same group).
  SimilarityMatrix matrix() const;
  std::vector<GroupId> groups() const;
  static constexpr std::size_t anchor_index = 0;
  // Batch indices of the ranked views (rank 1..6 -> index 1..6).
  static constexpr std::size_t rank3_index = 3;
  static constexpr std::size_t rank6_index = 6;
};

// Throws OutOfRange when base > 1 or base - 5C < -1.
OrderedExample ordered_example(double base, double c);

struct CurvePoint {
  double gap = 0.0;  // 3C, the similarity gap between the rank-3 and rank-6 views
  double value = 0.0;
};

// |dL/dc_{q,3}| - |dL/dc_{q,6}| per grid value of C.
std::vector<CurvePoint> gradient_gap_curve(double tau, bool attention,
                                           const std::vector<double>& c_grid,
                                           double base);

// Anchor loss value per grid value of C.
std::vector<CurvePoint> loss_gap_curve(double tau, bool attention,
                                       const std::vector<double>& c_grid,
                                       double base);

// Additive contribution sigmoid(s - reference_positive) of one negative pair
// to the anchor's inner denominator, swept over s.
std::vector<CurvePoint> sigmoid_margin_curve(double tau,
                                             const std::vector<double>& sim_grid,
                                             double reference_positive = 0.9);

struct TauSweepRow {
  double tau = 0.0;
  double gap = 0.0;
  double grad_diff = 0.0;
};

// gradient_gap_curve per temperature; long-form output.
std::vector<TauSweepRow> tau_sweep(const std::vector<double>& taus,
                                   bool attention,
                                   const std::vector<double>& c_grid,
                                   double base);

// Default grids: C = 0.005 * k for k = 1..30; taus from the ablation table.
std::vector<double> default_c_grid();
std::vector<double> default_tau_grid();

// CSV writers; headers are "gap,grad_diff", "gap,loss", "sim,contribution"
// and "tau,gap,grad_diff" respectively.
void write_curve_csv(const std::vector<CurvePoint>& curve,
                     const std::string& header, const std::string& path);
void write_tau_sweep_csv(const std::vector<TauSweepRow>& rows,
                         const std::string& path);

double total_variation(const std::vector<CurvePoint>& curve);

}  // namespace gravis
