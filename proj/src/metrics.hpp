#pragma once

#include <vector>

#include "common.hpp"

namespace bn2mf {

// Optimal column correspondence between a truth matrix and an estimate.
// permutation[k] is the estimate column matched to truth column k; signs are
// all +1 unless sign freedom was requested.
struct Alignment {
    std::vector<int> permutation;
    std::vector<double> signs;
    double objective = 0.0;  // total cosine similarity achieved
};

// ||truth - estimate||_F / ||truth||_F.
double relative_error(const Matrix& truth, const Matrix& estimate);

// 1 - a.b / (|a||b|); both vectors must have positive norm.
double cosine_distance(const Vector& a, const Vector& b);

// Mean cosine distance over same-index column pairs. Align first when the
// column order is arbitrary.
double cosine_distance_columns(const Matrix& truth, const Matrix& estimate);

// Exact assignment maximizing total cosine similarity between truth columns
// and estimate columns. With allow_sign, similarity is measured in absolute
// value and the sign making each match positive is reported.
Alignment align(const Matrix& truth, const Matrix& estimate, bool allow_sign);

// Reorder (and sign-flip) estimate columns into truth order.
Matrix apply_alignment(const Matrix& estimate, const Alignment& alignment);

// Normalized symmetric subspace distance between the column spans:
// sqrt(max(m, n) - ||U'V||_F^2) / sqrt(max(m, n)) over orthonormal bases,
// with numerical rank detected at tolerance 1e-10.
double subspace_distance(const Matrix& u_basis, const Matrix& v_basis);

}  // namespace bn2mf
