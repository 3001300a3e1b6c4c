#include "popsyn/generative.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "popsyn/error.hpp"

namespace popsyn {

std::string TrainTrace::batch_csv() const {
  std::ostringstream out;
  out.precision(17);
  const bool gan = !generator_loss.empty();
  out << (gan ? "iteration,discriminator_loss,generator_loss,d_real_mean,d_fake_mean\n" : "iteration,loss\n");
  for (std::size_t i = 0; i < batch_loss.size(); ++i) {
    out << i + 1 << ',' << batch_loss[i];
    if (gan) out << ',' << generator_loss[i] << ',' << d_real_mean[i] << ',' << d_fake_mean[i];
    out << '\n';
  }
  return out.str();
}

std::string TrainTrace::validation_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "iteration,validation_loss,validation_marginal_srmse\n";
  for (const auto& v : validation) out << v.iteration << ',' << v.loss << ',' << v.marginal_srmse << '\n';
  return out.str();
}

std::vector<std::vector<std::size_t>> shuffled_batches(std::size_t n, std::size_t batch_size, SeededRng& rng) {
  if (batch_size == 0) throw ValidationError("batch size must be positive");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t begin = 0; begin < n; begin += batch_size) {
    const std::size_t end = std::min(n, begin + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(begin),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

std::vector<AgentRecord> draw_from_blocks(const Matrix& probabilities, std::span<const AgentRecord> conditionals,
                                          std::size_t per_row, const Schema& schema, SeededRng& rng) {
  if (probabilities.rows() != conditionals.size() * per_row || probabilities.cols() != schema.output_width()) {
    throw ShapeError("draw_from_blocks: probabilities " + probabilities.shape_string() +
                     " do not match the requested sample count");
  }
  std::vector<AgentRecord> out;
  out.reserve(probabilities.rows());
  for (std::size_t r = 0; r < probabilities.rows(); ++r) {
    AgentRecord rec = conditionals[r / per_row];
    auto row = probabilities.row(r);
    std::size_t offset = 0;
    for (std::size_t f = 0; f < schema.output_count(); ++f) {
      const std::size_t w = schema.feature(f).categories();
      rec.values[f] = static_cast<CategoryIndex>(rng.categorical(row.subspan(offset, w)));
      offset += w;
    }
    out.push_back(std::move(rec));
  }
  return out;
}

Matrix repeated_conditionals(std::span<const AgentRecord> conditionals, std::size_t per_row, const Schema& schema) {
  const Matrix once = encode_conditionals(conditionals, schema);
  Matrix out(conditionals.size() * per_row, once.cols());
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto src = once.row(r / per_row);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

Matrix normal_matrix(std::size_t rows, std::size_t cols, SeededRng& rng) {
  Matrix m(rows, cols);
  for (auto& v : m.values()) v = rng.normal();
  return m;
}

void require_finite(double value, const std::string& what, std::size_t epoch, std::size_t iteration) {
  if (!std::isfinite(value)) {
    throw TrainingError(what + " became non-finite at epoch " + std::to_string(epoch) + ", iteration " +
                        std::to_string(iteration) + "; training aborted");
  }
}

void BestCheckpoint::offer(double value, std::size_t at, std::initializer_list<const Mlp*> networks) {
  if (!(value < score)) return;
  score = value;
  iteration = at;
  parameters.clear();
  for (const Mlp* net : networks) parameters.push_back(net->flat_parameters());
}

bool BestCheckpoint::restore(std::initializer_list<Mlp*> networks) const {
  if (parameters.empty()) return false;
  std::size_t i = 0;
  for (Mlp* net : networks) net->set_flat_parameters(parameters.at(i++));
  return true;
}

}  // namespace popsyn
