#include "kmor/rkhs.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "kmor/csv.hpp"
#include "kmor/errors.hpp"
#include "kmor/numerics.hpp"

namespace kmor {

RegressionDataset make_regression_dataset(const Eigen::MatrixXd& inputs,
                                          const Eigen::MatrixXd& targets,
                                          bool bias_augment) {
  if (inputs.cols() != targets.cols()) {
    throw ConfigError("regression dataset: input/target counts differ");
  }
  if (inputs.cols() == 0) throw ConfigError("regression dataset: empty");
  RegressionDataset ds;
  ds.bias_augmented = bias_augment;
  ds.targets = targets;
  if (bias_augment) {
    ds.inputs.resize(inputs.rows() + 1, inputs.cols());
    ds.inputs.topRows(inputs.rows()) = inputs;
    ds.inputs.bottomRows(1).setOnes();
  } else {
    ds.inputs = inputs;
  }
  return ds;
}

Eigen::VectorXd RKHSModel::feature_vector(const Eigen::VectorXd& z) const {
  Eigen::VectorXd zz = z;
  if (bias_augmented && z.size() + 1 == train_inputs.dim()) {
    zz.conservativeResize(z.size() + 1);
    zz(z.size()) = 1.0;
  }
  if (zz.size() != train_inputs.dim()) {
    throw NumericError("predict: input dimension mismatch");
  }
  EmpiricalFeatureMap fm(kernel, train_inputs);
  return fm.feature_vector(zz);
}

Eigen::VectorXd RKHSModel::predict(const Eigen::VectorXd& z) const {
  return coeffs * feature_vector(z);
}

RlsSolver::RlsSolver(const RegressionDataset& ds, const KernelSpec& kernel)
    : ds_(ds), kernel_(kernel) {
  SamplePanel panel(ds.inputs.transpose());
  gram_ = gram_matrix(kernel, panel);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram_);
  if (es.info() != Eigen::Success) {
    throw NumericError("rls_fit: eigendecomposition of the Gram matrix failed");
  }
  eigvals_ = es.eigenvalues().cwiseMax(0.0);
  eigvecs_ = es.eigenvectors();
  projected_ = eigvecs_.transpose() * ds.targets.transpose();  // l x r
}

RKHSModel RlsSolver::fit(double lambda) const {
  if (!(lambda > 0.0)) throw ConfigError("rls_fit: lambda must be > 0");
  const Eigen::VectorXd inv = (eigvals_.array() + lambda).inverse();
  // c_i = Q (Lambda + lambda)^{-1} Q^T y_i for every coordinate at once.
  Eigen::MatrixXd coeffs = eigvecs_ * (inv.asDiagonal() * projected_);
  RKHSModel model;
  model.kernel = kernel_;
  model.train_inputs = SamplePanel(ds_.inputs.transpose());
  model.coeffs = coeffs.transpose();
  model.lambda = lambda;
  model.bias_augmented = ds_.bias_augmented;
  return model;
}

Eigen::VectorXd RlsSolver::loocv_mse(double lambda) const {
  if (!(lambda > 0.0)) throw ConfigError("loocv_error: lambda must be > 0");
  const Eigen::VectorXd inv = (eigvals_.array() + lambda).inverse();
  const Eigen::MatrixXd coeffs = eigvecs_ * (inv.asDiagonal() * projected_);
  const Eigen::VectorXd hdiag = eigvecs_.cwiseAbs2() * inv;  // diag of H
  const Eigen::Index l = coeffs.rows();
  const Eigen::Index r = coeffs.cols();
  Eigen::VectorXd mse = Eigen::VectorXd::Zero(r);
  for (Eigen::Index j = 0; j < l; ++j) {
    const double d = hdiag(j);
    for (Eigen::Index i = 0; i < r; ++i) {
      const double res = coeffs(j, i) / d;
      mse(i) += res * res;
    }
  }
  return mse / static_cast<double>(l);
}

RKHSModel rls_fit(const RegressionDataset& ds, const KernelSpec& kernel,
                  double lambda) {
  return RlsSolver(ds, kernel).fit(lambda);
}

Eigen::VectorXd loocv_error(const RegressionDataset& ds,
                            const KernelSpec& kernel, double lambda) {
  return RlsSolver(ds, kernel).loocv_mse(lambda);
}

double select_lambda(const RegressionDataset& ds, const KernelSpec& kernel,
                     const std::vector<double>& grid,
                     std::vector<double>* errors_out) {
  if (grid.empty()) throw ConfigError("select_lambda: empty grid");
  RlsSolver solver(ds, kernel);
  double best = std::numeric_limits<double>::infinity();
  double best_lambda = grid.front();
  if (errors_out) errors_out->clear();
  for (double lambda : grid) {
    const double err = solver.loocv_mse(lambda).sum();
    if (errors_out) errors_out->push_back(err);
    if (err <= best) {  // ties break toward the later (larger) lambda
      best = err;
      best_lambda = lambda;
    }
  }
  return best_lambda;
}

double gamma_heuristic(const Eigen::MatrixXd& inputs) {
  const Eigen::Index l = inputs.cols();
  if (l < 2) throw ConfigError("gamma heuristic: need at least two examples");
  double sum = 0.0;
  long count = 0;
  for (Eigen::Index i = 0; i < l; ++i) {
    for (Eigen::Index j = i + 1; j < l; ++j) {
      sum += (inputs.col(i) - inputs.col(j)).norm();
      ++count;
    }
  }
  const double mean = sum / static_cast<double>(count);
  if (!(mean > 0.0)) {
    throw NumericError("gamma heuristic: all training examples coincide");
  }
  return 1.0 / mean;
}

namespace {

void write_matrix_csv(const Eigen::MatrixXd& M, const std::string& path) {
  CsvWriter w(path);
  std::vector<std::string> names;
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
    for (Eigen::Index c = 0; c < cols; ++c) {
      M(r, c) = parse_double(t.rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]);
    }
  }
  return M;
}

}  // namespace

void write_model_bundle(const RKHSModel& model, const std::string& json_path) {
  namespace fs = std::filesystem;
  const fs::path base(json_path);
  const fs::path dir = base.parent_path();
  const std::string stem = base.stem().string();
  const std::string inputs_name = stem + "_inputs.csv";
  const std::string coeffs_name = stem + "_coeffs.csv";
  write_matrix_csv(model.train_inputs.matrix(), (dir / inputs_name).string());
  write_matrix_csv(model.coeffs, (dir / coeffs_name).string());

  nlohmann::json j;
  j["kind"] = "rkhs-model";
  switch (model.kernel.family) {
    case KernelSpec::Family::Linear:
      j["kernel"] = {{"family", "linear"}};
      break;
    case KernelSpec::Family::Polynomial:
      j["kernel"] = {{"family", "polynomial"},
                     {"degree", model.kernel.degree},
                     {"offset", model.kernel.offset}};
      break;
    case KernelSpec::Family::Gaussian:
      j["kernel"] = {{"family", "gaussian"}, {"gamma", model.kernel.gamma}};
      break;
  }
  j["lambda"] = model.lambda;
  j["bias_augmented"] = model.bias_augmented;
  j["inputs"] = inputs_name;
  j["coeffs"] = coeffs_name;
  std::ofstream out(json_path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot open file for writing: " + json_path);
  out << j.dump(2) << '\n';
}

RKHSModel read_model_bundle(const std::string& json_path) {
  namespace fs = std::filesystem;
  std::ifstream in(json_path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file: " + json_path);
  nlohmann::json j;
  in >> j;
  if (j.value("kind", "") != "rkhs-model") {
    throw ConfigError("not a model bundle: " + json_path);
  }
  const fs::path dir = fs::path(json_path).parent_path();
  RKHSModel model;
  const auto& jk = j.at("kernel");
  const std::string family = jk.at("family").get<std::string>();
  if (family == "linear") {
    model.kernel = KernelSpec::linear();
  } else if (family == "polynomial") {
    model.kernel = KernelSpec::polynomial(jk.at("degree").get<int>(),
                                          jk.value("offset", 1.0));
  } else if (family == "gaussian") {
    model.kernel = KernelSpec::gaussian(jk.at("gamma").get<double>());
  } else {
    throw ConfigError("unknown kernel family '" + family + "'");
  }
  model.lambda = j.at("lambda").get<double>();
  model.bias_augmented = j.at("bias_augmented").get<bool>();
  model.train_inputs = SamplePanel(
      read_matrix_csv((dir / j.at("inputs").get<std::string>()).string()));
  model.coeffs =
      read_matrix_csv((dir / j.at("coeffs").get<std::string>()).string());
  if (model.coeffs.cols() != model.train_inputs.count()) {
    throw ConfigError("model bundle: coefficient/input count mismatch");
  }
  return model;
}

}  // namespace kmor
