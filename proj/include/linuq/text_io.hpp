#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "linuq/cg.hpp"
#include "linuq/matrix_core.hpp"
#include "linuq/posterior_uq.hpp"

namespace linuq {

/// Plain-text formats. Values are printed with %.17g so doubles round-trip
/// exactly. Lines starting with '#' are comments.
///
/// matrix:  "rows cols" header line, then one whitespace-separated row per
///          line.
/// vector:  "n" header line, then one value per line.
/// model:   line-oriented sections documented in README; stores the
///          observation record of the run plus (prior_kind, alpha, omega^2),
///          from which the posterior is rebuilt exactly.

std::string format_double(double v);

void write_matrix(std::ostream& out, const Matrix& m);
Matrix read_matrix(std::istream& in);
void write_vector(std::ostream& out, const Vector& v);
Vector read_vector(std::istream& in);

Matrix read_matrix_file(const std::string& path);
Vector read_vector_file(const std::string& path);
void write_matrix_file(const std::string& path, const Matrix& m);
void write_vector_file(const std::string& path, const Vector& v);

struct ModelFile {
  PriorKind prior_kind = PriorKind::kStandardizedNorm;
  double alpha = 1.0;
  double omega_sq = 0.0;
  std::shared_ptr<const CgTrace> trace;

  PosteriorModel build() const;
};

void write_model_file(const std::string& path, const ModelFile& model);
ModelFile read_model_file(const std::string& path);

/// FNV-1a hash of a canonical string; used to stamp CSV outputs.
std::uint64_t fnv1a(const std::string& text);

}  // namespace linuq
