#include "selinf/data.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace selinf {

NoiseModel NoiseModel::isotropic(double sigma2) {
  if (!(sigma2 > 0.0))
    throw InvalidInput("noise: sigma2 must be positive, got " +
                       std::to_string(sigma2));
  NoiseModel m;
  m.isotropic_ = true;
  m.sigma2_ = sigma2;
  return m;
}

NoiseModel NoiseModel::general(Matrix sigma) {
  if (sigma.rows() != sigma.cols() || sigma.rows() < 1)
    throw InvalidInput("noise: Sigma must be square");
  if (!sigma.isApprox(sigma.transpose(), 1e-10))
    throw InvalidInput("noise: Sigma must be symmetric");
  NoiseModel m;
  m.isotropic_ = false;
  m.sigma_ = std::move(sigma);
  m.llt_.compute(m.sigma_);
  if (m.llt_.info() != Eigen::Success)
    throw InvalidInput("noise: Sigma is not positive definite");
  return m;
}

Vector NoiseModel::apply(const Vector& v) const {
  if (isotropic_) return sigma2_ * v;
  return sigma_ * v;
}

double NoiseModel::quad(const Vector& v) const {
  if (isotropic_) return sigma2_ * v.squaredNorm();
  return v.dot(sigma_ * v);
}

Vector NoiseModel::half_apply(const Vector& v) const {
  if (isotropic_) return std::sqrt(sigma2_) * v;
  return llt_.matrixL() * v;
}

RegressionData RegressionData::make(Matrix X, Vector y,
                                    std::optional<NoiseModel> noise,
                                    std::vector<std::string> names) {
  const auto n = X.rows(), p = X.cols();
  if (n < 1 || p < 1) throw InvalidInput("data: need n >= 1 and p >= 1");
  if (y.size() != n)
    throw InvalidInput("data: y has length " + std::to_string(y.size()) +
                       ", expected " + std::to_string(n));
  if (!names.empty() && static_cast<Eigen::Index>(names.size()) != p)
    throw InvalidInput("data: names length does not match p");
  if (noise && !noise->is_isotropic() && noise->dim() != n)
    throw InvalidInput("data: Sigma dimension does not match n");

  RegressionData d;
  d.warnings = {};
  for (Eigen::Index j = 0; j < p; ++j) {
    if (X.col(j).lpNorm<Eigen::Infinity>() == 0.0)
      throw InvalidInput("data: column " + std::to_string(j + 1) +
                         " is identically zero");
  }
  // General-position check: duplicated columns (up to sign) break the
  // uniqueness of the lasso solution; surfaced as a warning only.
  for (Eigen::Index j = 0; j < p; ++j) {
    for (Eigen::Index k = j + 1; k < p; ++k) {
      const double dplus = (X.col(j) - X.col(k)).lpNorm<Eigen::Infinity>();
      const double dminus = (X.col(j) + X.col(k)).lpNorm<Eigen::Infinity>();
      if (std::min(dplus, dminus) < 1e-10)
        d.warnings.push_back("columns " + std::to_string(j + 1) + " and " +
                             std::to_string(k + 1) +
                             " coincide up to sign; design is not in general "
                             "position");
    }
  }
  d.X = std::move(X);
  d.y = std::move(y);
  d.noise = std::move(noise);
  d.names = std::move(names);
  return d;
}

const NoiseModel& RegressionData::require_noise() const {
  if (!noise)
    throw InvalidInput(
        "noise level not set: pass --sigma or use --estimate-sigma");
  return *noise;
}

Contrast Contrast::make(Vector eta, const NoiseModel& noise,
                        std::string label) {
  if (eta.lpNorm<Eigen::Infinity>() == 0.0)
    throw InvalidInput("contrast: eta is identically zero");
  Contrast c;
  c.scale = noise.quad(eta);
  if (!(c.scale > 0.0)) throw NumericalError("contrast: eta' Sigma eta <= 0");
  c.eta = std::move(eta);
  c.label = std::move(label);
  return c;
}

Polytope Polytope::make(Matrix A, Vector b, EventMeta meta) {
  if (A.rows() != b.size())
    throw InvalidInput("polytope: A has " + std::to_string(A.rows()) +
                       " rows but b has length " + std::to_string(b.size()));
  Polytope p;
  p.A = std::move(A);
  p.b = std::move(b);
  p.meta = std::move(meta);
  return p;
}

SelectionEvent SelectionEvent::single(Polytope poly) {
  SelectionEvent e;
  e.v_ = std::move(poly);
  return e;
}

SelectionEvent SelectionEvent::union_of(std::vector<Polytope> polys) {
  if (polys.empty()) throw InvalidInput("selection event: empty union");
  const int dim = polys.front().dim();
  for (const auto& p : polys)
    if (p.dim() != dim)
      throw InvalidInput("selection event: union members differ in dimension");
  SelectionEvent e;
  e.v_ = std::move(polys);
  return e;
}

SelectionEvent SelectionEvent::blackbox(BlackboxSelector selector) {
  if (!selector.same_outcome)
    throw InvalidInput("selection event: empty blackbox selector");
  SelectionEvent e;
  e.v_ = std::move(selector);
  return e;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_cell(const std::string& cell, std::size_t row,
                  const std::string& col) {
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(cell, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  // Trailing junk after the number also counts as non-numeric.
  while (pos < cell.size() && std::isspace(static_cast<unsigned char>(cell[pos])))
    ++pos;
  if (cell.empty() || pos != cell.size())
    throw InvalidInput("csv: non-numeric cell '" + cell + "' at data row " +
                       std::to_string(row) + ", column '" + col + "'");
  return v;
}

}  // namespace

RegressionData load_csv(const std::string& path, const std::string& response) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("csv: cannot open file '" + path + "'");

  std::string line;
  if (!std::getline(in, line) || line.empty())
    throw InvalidInput("csv: missing header row in '" + path + "'");
  const std::vector<std::string> header = split_csv_line(line);

  int resp_col = -1;
  for (std::size_t j = 0; j < header.size(); ++j)
    if (header[j] == response) resp_col = static_cast<int>(j);
  if (resp_col < 0)
    throw InvalidInput("csv: response column '" + response + "' not found");
  if (header.size() < 2)
    throw InvalidInput("csv: need at least one predictor column");

  std::vector<std::vector<double>> rows;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw InvalidInput("csv: data row " + std::to_string(lineno) + " has " +
                         std::to_string(cells.size()) + " cells, expected " +
                         std::to_string(header.size()));
    std::vector<double> vals(cells.size());
    for (std::size_t j = 0; j < cells.size(); ++j)
      vals[j] = parse_cell(cells[j], lineno, header[j]);
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) throw InvalidInput("csv: no data rows in '" + path + "'");

  const int n = static_cast<int>(rows.size());
  const int p = static_cast<int>(header.size()) - 1;
  Matrix X(n, p);
  Vector y(n);
  std::vector<std::string> names;
  names.reserve(p);
  for (std::size_t j = 0; j < header.size(); ++j)
    if (static_cast<int>(j) != resp_col) names.push_back(header[j]);
  for (int i = 0; i < n; ++i) {
    int jx = 0;
    for (std::size_t j = 0; j < header.size(); ++j) {
      if (static_cast<int>(j) == resp_col)
        y(i) = rows[i][j];
      else
        X(i, jx++) = rows[i][j];
    }
  }
  return RegressionData::make(std::move(X), std::move(y), std::nullopt,
                              std::move(names));
}

RegressionData standardize(const RegressionData& data) {
  const int n = data.n(), p = data.p();
  Matrix X = data.X;
  Vector y = data.y;
  for (int j = 0; j < p; ++j) {
    const double mean = X.col(j).mean();
    X.col(j).array() -= mean;
    const double sd = std::sqrt(X.col(j).squaredNorm() / n);
    if (sd < 1e-12) {
      const std::string name = data.names.empty()
                                   ? "column " + std::to_string(j + 1)
                                   : "column '" + data.names[j] + "'";
      throw InvalidInput("standardize: " + name + " is constant");
    }
    X.col(j) /= sd;
  }
  y.array() -= y.mean();
  RegressionData out =
      RegressionData::make(std::move(X), std::move(y), data.noise, data.names);
  out.standardized = true;
  return out;
}

}  // namespace selinf
