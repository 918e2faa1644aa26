#include "pegnet/normalizer.hpp"

#include "pegnet/errors.hpp"

#include <cmath>

namespace pegnet {

namespace {

nlohmann::json row_to_json(const Eigen::RowVectorXd& r) { return std::vector<double>(r.data(), r.data() + r.size()); }

Eigen::RowVectorXd row_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::RowVectorXd>(v.data(), static_cast<Index>(v.size()));
}

}  // namespace

Tensor Normalizer::normalize(std::size_t k, const Tensor& x) const {
  const FieldStats& s = at(k);
  if (x.cols() != s.mean.size()) throw ShapeError("normalize: width mismatch for field " + s.name);
  return (x.rowwise() - s.mean).array().rowwise() / s.std.array();
}

Tensor Normalizer::denormalize(std::size_t k, const Tensor& x) const {
  const FieldStats& s = at(k);
  if (x.cols() != s.mean.size()) throw ShapeError("denormalize: width mismatch for field " + s.name);
  Tensor out = x.array().rowwise() * s.std.array();
  out.rowwise() += s.mean;
  return out;
}

Normalizer Normalizer::identity(const TaskSpec& task) {
  Normalizer n;
  for (const auto& f : task.fields) {
    n.fields.push_back({f.name, Eigen::RowVectorXd::Zero(f.width), Eigen::RowVectorXd::Ones(f.width),
                        Eigen::RowVectorXd::Ones(f.width)});
  }
  return n;
}

void Normalizer::check(const TaskSpec& task) const {
  if (fields.size() != task.fields.size()) throw ConfigError("normalizer field count does not match task");
  for (std::size_t k = 0; k < fields.size(); ++k) {
    if (fields[k].name != task.fields[k].name || fields[k].mean.size() != task.fields[k].width ||
        fields[k].std.size() != task.fields[k].width || fields[k].rate_scale.size() != task.fields[k].width) {
      throw ConfigError("normalizer entry " + fields[k].name + " does not match task field " + task.fields[k].name);
    }
  }
}

nlohmann::json to_json(const Normalizer& n) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& f : n.fields) {
    out.push_back({{"name", f.name},
                   {"mean", row_to_json(f.mean)},
                   {"std", row_to_json(f.std)},
                   {"rate_scale", row_to_json(f.rate_scale)}});
  }
  return out;
}

Normalizer normalizer_from_json(const nlohmann::json& j) {
  Normalizer n;
  for (const auto& f : j) {
    n.fields.push_back({f.at("name").get<std::string>(), row_from_json(f.at("mean")), row_from_json(f.at("std")),
                        row_from_json(f.at("rate_scale"))});
  }
  return n;
}

NormalizerBuilder::NormalizerBuilder(const TaskSpec& task) : task_(task) {
  for (const auto& f : task.fields) {
    sum_.push_back(Eigen::RowVectorXd::Zero(f.width));
    sum_sq_.push_back(Eigen::RowVectorXd::Zero(f.width));
    rate_sq_.push_back(Eigen::RowVectorXd::Zero(f.width));
    count_.push_back(0.0);
    rate_count_.push_back(0.0);
  }
}

void NormalizerBuilder::add_trajectory(const std::vector<std::vector<Tensor>>& fields, double dt) {
  if (fields.size() != task_.fields.size()) throw ShapeError("normalizer: field count mismatch");
  for (std::size_t k = 0; k < fields.size(); ++k) {
    const auto& series = fields[k];
    for (std::size_t t = 0; t < series.size(); ++t) {
      const Tensor& x = series[t];
      if (x.cols() != task_.fields[k].width) throw ShapeError("normalizer: width mismatch");
      sum_[k] += x.colwise().sum();
      sum_sq_[k] += x.array().square().colwise().sum().matrix();
      count_[k] += static_cast<double>(x.rows());
      if (t + 1 < series.size()) {
        const Tensor rate = (series[t + 1] - x) / dt;
        rate_sq_[k] += rate.array().square().colwise().sum().matrix();
        rate_count_[k] += static_cast<double>(x.rows());
      }
    }
  }
}

Normalizer NormalizerBuilder::finish() const {
  Normalizer n;
  for (std::size_t k = 0; k < task_.fields.size(); ++k) {
    const int w = task_.fields[k].width;
    FieldStats s{task_.fields[k].name, Eigen::RowVectorXd::Zero(w), Eigen::RowVectorXd::Ones(w),
                 Eigen::RowVectorXd::Ones(w)};
    if (count_[k] > 0) {
      s.mean = sum_[k] / count_[k];
      const Eigen::RowVectorXd var = (sum_sq_[k] / count_[k]).array() - s.mean.array().square();
      s.std = var.array().max(0.0).sqrt().max(kStdFloor);
    }
    if (rate_count_[k] > 0) s.rate_scale = (rate_sq_[k] / rate_count_[k]).array().sqrt().max(kStdFloor);
    n.fields.push_back(std::move(s));
  }
  return n;
}

}  // namespace pegnet
