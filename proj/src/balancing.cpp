#include "kmor/balancing.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "kmor/csv.hpp"
#include "kmor/errors.hpp"

namespace kmor {

KernelBalance kernel_balance(const Eigen::MatrixXd& Kc_raw,
                             const Eigen::MatrixXd& Ko_raw, double scale_c,
                             double scale_o, const ToleranceConfig& tol) {
  if (Kc_raw.rows() != Ko_raw.rows() || Kc_raw.cols() != Ko_raw.cols()) {
    std::ostringstream msg;
    msg << "kernel_balance: Kc is " << Kc_raw.rows() << "x" << Kc_raw.cols()
        << " but Ko is " << Ko_raw.rows() << "x" << Ko_raw.cols()
        << "; the method needs kernel matrices of equal size (m = p)";
    throw NumericError(msg.str());
  }
  const Eigen::Index L = Kc_raw.rows();
  Eigen::MatrixXd Kc = scale_c * Kc_raw;
  Kc.diagonal().array() += tol.jitter;
  const Eigen::MatrixXd Ko = scale_o * Ko_raw;

  const PsdSqrtPair S = psd_sqrt_with_pinv(Kc, tol);
  const SymEig eig = sym_eig_descending(S.sqrt * Ko * S.sqrt);

  const double top = eig.values.maxCoeff();
  if (!(top > 0.0)) {
    throw NumericError("kernel_balance: spectrum collapsed to zero (degenerate system)");
  }
  Eigen::Index rank = 0;
  while (rank < L && eig.values(rank) > tol.pinv_rtol * top) ++rank;

  KernelBalance out;
  out.sigma = eig.values.head(rank).cwiseSqrt();
  const Eigen::MatrixXd Uq = eig.vectors.leftCols(rank);
  out.T = out.sigma.cwiseSqrt().asDiagonal() * Uq.transpose() * S.pinv_sqrt;
  out.Tinv_t =
      out.sigma.cwiseSqrt().cwiseInverse().asDiagonal() * Uq.transpose() * S.sqrt;
  return out;
}

Eigen::VectorXd sigma_gap_ratios(const Eigen::VectorXd& sigma) {
  if (sigma.size() < 2) return Eigen::VectorXd();
  Eigen::VectorXd r(sigma.size() - 1);
  for (Eigen::Index k = 0; k + 1 < sigma.size(); ++k) {
    r(k) = sigma(k + 1) > 0.0 ? sigma(k) / sigma(k + 1)
                              : std::numeric_limits<double>::infinity();
  }
  return r;
}

int auto_gap_order(const Eigen::VectorXd& sigma, double threshold) {
  const Eigen::VectorXd ratios = sigma_gap_ratios(sigma);
  if (ratios.size() == 0) return static_cast<int>(sigma.size());
  for (Eigen::Index k = 0; k < ratios.size(); ++k) {
    if (ratios(k) >= threshold) return static_cast<int>(k) + 1;
  }
  Eigen::Index best = 0;
  ratios.maxCoeff(&best);
  return static_cast<int>(best) + 1;
}

BalancedReduction::BalancedReduction(EmpiricalFeatureMap fmap,
                                     const KernelBalance& balance,
                                     const Eigen::MatrixXd& Kc_raw, int q,
                                     double gram_scale,
                                     ReductionScaling scaling)
    : fmap_(std::move(fmap)),
      sigma_(balance.sigma),
      gram_scale_(gram_scale),
      q_(q),
      scaling_(scaling) {
  const int rank = static_cast<int>(balance.sigma.size());
  if (q < 1 || q > rank) {
    std::ostringstream msg;
    msg << "truncate: order q = " << q << " outside [1, " << rank
        << "] (numerical rank)";
    throw ConfigError(msg.str());
  }
  sigma_q_ = balance.sigma.head(q);
  Tq_ = balance.T.topRows(q).transpose();  // L x q
  if (scaling == ReductionScaling::InputNormal) {
    // Divide row i of T by sigma_i^{1/2}: unit feature norm per
    // retained direction.
    Tq_ = Tq_ * sigma_q_.cwiseSqrt().cwiseInverse().asDiagonal();
  }

  pi_samples_ = Tq_.transpose() * Kc_raw;  // q x L
  const Eigen::MatrixXd block = pi_samples_ * Tq_;  // T_q^T Kc T_q
  const Eigen::MatrixXd alt =
      (Tq_.transpose() * Tq_) * (gram_scale_ > 0.0
                                      ? Eigen::MatrixXd(
                                            (sigma_q_ / gram_scale_).asDiagonal())
                                      : Eigen::MatrixXd(sigma_q_.asDiagonal()));
  metric_identity_dev_ = (block - alt).norm() / block.norm();

  Eigen::FullPivLU<Eigen::MatrixXd> lu(block);
  if (!lu.isInvertible()) {
    throw NumericError("metric_matrix: retained block T_q^T Kc T_q is singular");
  }
  metric_ = lu.inverse();
}

Eigen::VectorXd BalancedReduction::reduce(const Eigen::VectorXd& x) const {
  return Tq_.transpose() * fmap_.feature_vector(x);
}

Eigen::MatrixXd BalancedReduction::jacobian_of_pi(const Eigen::VectorXd& x) const {
  return Tq_.transpose() * fmap_.feature_jacobian(x);
}

BalancedReduction truncate(const EmpiricalFeatureMap& fmap,
                           const KernelBalance& balance,
                           const Eigen::MatrixXd& Kc_raw, int q,
                           double gram_scale, ReductionScaling scaling) {
  return BalancedReduction(fmap, balance, Kc_raw, q, gram_scale, scaling);
}

namespace {

void write_matrix_csv(const Eigen::MatrixXd& M, const std::string& path) {
  CsvWriter w(path);
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(M.cols()));
  for (Eigen::Index c = 0; c < M.cols(); ++c) {
    names.push_back("c" + std::to_string(c + 1));
  }
  w.header(names);
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    w.begin_row();
    for (Eigen::Index c = 0; c < M.cols(); ++c) w.field(M(r, c));
    w.end_row();
  }
}

Eigen::MatrixXd read_matrix_csv(const std::string& path) {
  const CsvTable t = read_csv(path);
  const Eigen::Index rows = static_cast<Eigen::Index>(t.rows.size());
  const Eigen::Index cols = static_cast<Eigen::Index>(t.header.size());
  Eigen::MatrixXd M(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (static_cast<Eigen::Index>(t.rows[static_cast<std::size_t>(r)].size()) != cols) {
      throw ConfigError("matrix CSV: ragged row in " + path);
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      M(r, c) = parse_double(t.rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]);
    }
  }
  return M;
}

nlohmann::json kernel_to_json(const KernelSpec& k) {
  nlohmann::json j;
  switch (k.family) {
    case KernelSpec::Family::Linear:
      j["family"] = "linear";
      break;
    case KernelSpec::Family::Polynomial:
      j["family"] = "polynomial";
      j["degree"] = k.degree;
      j["offset"] = k.offset;
      break;
    case KernelSpec::Family::Gaussian:
      j["family"] = "gaussian";
      j["gamma"] = k.gamma;
      break;
  }
  return j;
}

KernelSpec kernel_from_json(const nlohmann::json& j) {
  const std::string family = j.at("family").get<std::string>();
  if (family == "linear") return KernelSpec::linear();
  if (family == "polynomial") {
    return KernelSpec::polynomial(j.at("degree").get<int>(),
                                  j.value("offset", 1.0));
  }
  if (family == "gaussian") {
    return KernelSpec::gaussian(j.at("gamma").get<double>());
  }
  throw ConfigError("unknown kernel family '" + family + "'");
}

}  // namespace

void write_reduction_bundle(const BalancedReduction& br,
                            const std::string& json_path) {
  namespace fs = std::filesystem;
  const fs::path base(json_path);
  const fs::path dir = base.parent_path();
  const std::string stem = base.stem().string();
  const std::string tq_name = stem + "_Tq.csv";
  const std::string samples_name = stem + "_samples.csv";

  write_matrix_csv(br.Tq(), (dir / tq_name).string());
  write_matrix_csv(br.fmap().samples().matrix(), (dir / samples_name).string());

  nlohmann::json j;
  j["kind"] = "reduction-bundle";
  j["kernel"] = kernel_to_json(br.fmap().kernel());
  j["order"] = br.order();
  j["gram_scale"] = br.gram_scale();
  j["scaling"] = br.scaling() == ReductionScaling::InputNormal ? "input-normal"
                                                               : "balanced";
  j["sigma"] = std::vector<double>(br.sigma().data(),
                                   br.sigma().data() + br.sigma().size());
  j["t_q"] = tq_name;
  j["samples"] = samples_name;
  j["metric_identity_deviation"] = br.metric_identity_deviation();
  std::ofstream out(json_path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot open file for writing: " + json_path);
  out << j.dump(2) << '\n';
}

BalancedReduction read_reduction_bundle(const std::string& json_path) {
  namespace fs = std::filesystem;
  std::ifstream in(json_path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file: " + json_path);
  nlohmann::json j;
  in >> j;
  if (j.value("kind", "") != "reduction-bundle") {
    throw ConfigError("not a reduction bundle: " + json_path);
  }
  const fs::path dir = fs::path(json_path).parent_path();
  const Eigen::MatrixXd Tq =
      read_matrix_csv((dir / j.at("t_q").get<std::string>()).string());
  const Eigen::MatrixXd samples =
      read_matrix_csv((dir / j.at("samples").get<std::string>()).string());
  const KernelSpec kernel = kernel_from_json(j.at("kernel"));
  const int q = j.at("order").get<int>();
  const double gram_scale = j.at("gram_scale").get<double>();
  const std::vector<double> sig = j.at("sigma").get<std::vector<double>>();
  const ReductionScaling scaling =
      j.value("scaling", "input-normal") == std::string("balanced")
          ? ReductionScaling::Balanced
          : ReductionScaling::InputNormal;

  // Rebuild a KernelBalance-shaped view out of the stored pieces. The
  // stored T_q already carries its scaling, so reconstruct through the
  // constructor by undoing it for the InputNormal case.
  EmpiricalFeatureMap fmap(kernel, SamplePanel(samples));
  const Eigen::MatrixXd Kc_raw = gram_matrix(kernel, fmap.samples());
  KernelBalance kb;
  kb.sigma = Eigen::Map<const Eigen::VectorXd>(sig.data(),
                                               static_cast<Eigen::Index>(sig.size()));
  Eigen::MatrixXd Trows = Tq.transpose();  // q x L
  if (scaling == ReductionScaling::InputNormal) {
    Trows = kb.sigma.head(q).cwiseSqrt().asDiagonal() * Trows;
  }
  // Pad the transform back to full retained rank with the stored rows
  // only; orders above q are not reloadable from a bundle.
  if (q != kb.sigma.size()) {
    kb.sigma = kb.sigma.head(q).eval();
  }
  kb.T = Trows;
  return BalancedReduction(std::move(fmap), kb, Kc_raw, q, gram_scale, scaling);
}

}  // namespace kmor
