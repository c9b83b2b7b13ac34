#include "linuq/text_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace linuq {

namespace {

std::string next_content_line(std::istream& in, const char* what) {
  std::string line;
  while (std::getline(in, line)) {
    const auto pos = line.find_first_not_of(" \t\r");
    if (pos == std::string::npos) continue;
    if (line[pos] == '#') continue;
    return line;
  }
  throw std::invalid_argument(std::string("unexpected end of file reading ") +
                              what);
}

Matrix read_rows(std::istream& in, Index rows, Index cols, const char* what) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    std::istringstream row(next_content_line(in, what));
    for (Index j = 0; j < cols; ++j) {
      if (!(row >> m(i, j))) {
        std::ostringstream msg;
        msg << what << ": malformed row " << i;
        throw std::invalid_argument(msg.str());
      }
    }
  }
  return m;
}

void write_rows(std::ostream& out, const Matrix& m) {
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) out << ' ';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

std::string expect_keyword(std::istream& in, const std::string& keyword) {
  std::istringstream line(next_content_line(in, keyword.c_str()));
  std::string word, rest;
  line >> word;
  if (word != keyword) {
    throw std::invalid_argument("model file: expected '" + keyword +
                                "', found '" + word + "'");
  }
  std::getline(line, rest);
  const auto pos = rest.find_first_not_of(" \t");
  return pos == std::string::npos ? std::string() : rest.substr(pos);
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_matrix(std::ostream& out, const Matrix& m) {
  out << m.rows() << ' ' << m.cols() << '\n';
  write_rows(out, m);
}

Matrix read_matrix(std::istream& in) {
  std::istringstream header(next_content_line(in, "matrix header"));
  Index rows = 0, cols = 0;
  if (!(header >> rows >> cols) || rows < 0 || cols < 0) {
    throw std::invalid_argument("matrix header: expected 'rows cols'");
  }
  return read_rows(in, rows, cols, "matrix");
}

void write_vector(std::ostream& out, const Vector& v) {
  out << v.size() << '\n';
  for (Index i = 0; i < v.size(); ++i) out << format_double(v(i)) << '\n';
}

Vector read_vector(std::istream& in) {
  std::istringstream header(next_content_line(in, "vector header"));
  Index n = 0;
  if (!(header >> n) || n < 0) {
    throw std::invalid_argument("vector header: expected length");
  }
  Vector v(n);
  for (Index i = 0; i < n; ++i) {
    std::istringstream line(next_content_line(in, "vector"));
    if (!(line >> v(i))) {
      std::ostringstream msg;
      msg << "vector: malformed entry " << i;
      throw std::invalid_argument(msg.str());
    }
  }
  return v;
}

Matrix read_matrix_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path);
  return read_matrix(in);
}

Vector read_vector_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path);
  return read_vector(in);
}

void write_matrix_file(const std::string& path, const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot open " + path + " for writing");
  write_matrix(out, m);
}

void write_vector_file(const std::string& path, const Vector& v) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot open " + path + " for writing");
  write_vector(out, v);
}

PosteriorModel ModelFile::build() const {
  if (prior_kind == PriorKind::kBfgsCg) {
    return bfgs_cg_posterior(trace, omega_sq, alpha);
  }
  return standardized_norm_posterior(trace, alpha, omega_sq);
}

void write_model_file(const std::string& path, const ModelFile& model) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot open " + path + " for writing");
  const CgTrace& t = *model.trace;
  out << "linuq-model 1\n";
  out << "prior_kind "
      << (model.prior_kind == PriorKind::kBfgsCg ? "bfgs_cg"
                                                 : "standardized_norm")
      << '\n';
  out << "alpha " << format_double(model.alpha) << '\n';
  out << "omega_sq " << format_double(model.omega_sq) << '\n';
  out << "converged " << (t.converged ? 1 : 0) << '\n';
  out << "directions\n";
  write_matrix(out, t.directions);
  out << "residuals\n";
  write_matrix(out, t.residuals);
  out << "iterates\n";
  write_matrix(out, t.iterates);
  out << "residual_norms\n";
  write_vector(out, t.residual_norms);
  out << "step_lengths\n";
  write_vector(out, t.step_lengths);
}

ModelFile read_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path);
  ModelFile model;
  const std::string magic = next_content_line(in, "model header");
  if (magic.rfind("linuq-model", 0) != 0) {
    throw std::invalid_argument("model file: bad header '" + magic + "'");
  }
  const std::string kind = expect_keyword(in, "prior_kind");
  if (kind == "bfgs_cg") {
    model.prior_kind = PriorKind::kBfgsCg;
  } else if (kind == "standardized_norm") {
    model.prior_kind = PriorKind::kStandardizedNorm;
  } else {
    throw std::invalid_argument("model file: unknown prior_kind '" + kind +
                                "'");
  }
  model.alpha = std::stod(expect_keyword(in, "alpha"));
  model.omega_sq = std::stod(expect_keyword(in, "omega_sq"));
  const bool converged = std::stoi(expect_keyword(in, "converged")) != 0;

  auto trace = std::make_shared<CgTrace>();
  expect_keyword(in, "directions");
  trace->directions = read_matrix(in);
  expect_keyword(in, "residuals");
  trace->residuals = read_matrix(in);
  expect_keyword(in, "iterates");
  trace->iterates = read_matrix(in);
  expect_keyword(in, "residual_norms");
  trace->residual_norms = read_vector(in);
  expect_keyword(in, "step_lengths");
  trace->step_lengths = read_vector(in);
  trace->converged = converged;
  trace->steps = trace->directions.cols();
  if (trace->residuals.cols() != trace->steps + 1 ||
      trace->residual_norms.size() != trace->steps + 1 ||
      trace->step_lengths.size() != trace->steps) {
    throw std::invalid_argument("model file: inconsistent section sizes");
  }
  model.trace = std::move(trace);
  return model;
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (const char c : text) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

}  // namespace linuq
