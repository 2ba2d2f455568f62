#pragma once

#include <optional>
#include <string>
#include <vector>

#include "model.hpp"

namespace bn2mf {

// Strict CSV reader: UTF-8, header row of column ids, first column row ids,
// remaining cells non-negative decimal numbers. Ragged rows, non-numeric
// cells, NaN, and negatives are rejected with their (row id, column id)
// location.
ExposureMatrix load_csv(const std::string& path);

// Writes with 17 significant digits so a read-back reproduces the values
// bit-exactly.
void write_csv(const std::string& path, const Matrix& values,
               const std::vector<std::string>& row_ids,
               const std::vector<std::string>& col_ids);

void write_csv(const std::string& path, const ExposureMatrix& x);

// Detection-limit substitution and column scaling: entries below lod[j] are
// replaced by lod[j]/sqrt(2) (lod entries <= 0 or NaN mean "no limit"), then
// each column is optionally divided by its sample standard deviation without
// centering.
ExposureMatrix preprocess(const ExposureMatrix& x, const std::optional<Vector>& lod,
                          bool scale_sd);

}  // namespace bn2mf
