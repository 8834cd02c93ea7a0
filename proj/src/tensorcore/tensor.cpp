#include "dghif/tensorcore/tensor.hpp"

#include <sstream>

#include "dghif/common/errors.hpp"
#include "dghif/tensorcore/precision.hpp"

namespace dghif::tc {

std::size_t numel(const Shape& shape) noexcept {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? ", " : "") << shape[i];
  out << ']';
  return out.str();
}

std::span<double> Node::grad_buffer() {
  if (grad.empty()) grad.assign(value.size(), 0.0);
  return grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  auto node = std::make_shared<Node>();
  node->value.assign(tc::numel(shape), quantize(value));
  node->shape = std::move(shape);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::from_values(Shape shape, std::vector<double> values, bool requires_grad) {
  if (tc::numel(shape) != values.size()) {
    throw ShapeError("from_values: shape " + to_string(shape) + " needs " +
                     std::to_string(tc::numel(shape)) + " values, got " + std::to_string(values.size()));
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  quantize(node->value);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return full({}, value, requires_grad); }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) {
    throw ShapeError("dim: axis " + std::to_string(axis) + " out of range for shape " +
                     to_string(shape()));
  }
  return node_->shape[axis];
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item: tensor of shape " + to_string(shape()) + " is not a scalar");
  return node_->value[0];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  if (rank() != 2) throw ShapeError("at(row, col): tensor of shape " + to_string(shape()) + " is not a matrix");
  return node_->value.at(row * node_->shape[1] + col);
}

Tensor& Tensor::set_requires_grad(bool flag) {
  node_->requires_grad = flag;
  return *this;
}

Tensor Tensor::detach() const {
  auto node = std::make_shared<Node>();
  node->shape = node_->shape;
  node->value = node_->value;
  return Tensor(std::move(node));
}

// ---------------------------------------------------------------------------

namespace {
thread_local Tape* t_active_tape = nullptr;
}

Tape* active_tape() noexcept { return t_active_tape; }

TapeScope::TapeScope(Tape& tape) noexcept : previous_(t_active_tape) { t_active_tape = &tape; }

TapeScope::~TapeScope() { t_active_tape = previous_; }

NoGradScope::NoGradScope() noexcept : previous_(t_active_tape) { t_active_tape = nullptr; }

NoGradScope::~NoGradScope() { t_active_tape = previous_; }

std::int64_t Tape::push(Record record) {
  const auto id = static_cast<std::int64_t>(records_.size());
  record.output->tape_id = id;
  records_.push_back(std::move(record));
  return id;
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || !loss.is_scalar()) {
    throw ShapeError("backward: loss must be a scalar, got shape " +
                     (loss.defined() ? to_string(loss.shape()) : std::string("<undefined>")));
  }
  const auto id = loss.tape_id();
  if (id < 0 || static_cast<std::size_t>(id) >= records_.size() ||
      records_[static_cast<std::size_t>(id)].output != loss.node()) {
    throw StateError("backward: loss is not recorded on this tape");
  }
  loss.node()->grad_buffer()[0] += 1.0;
  for (auto i = id; i >= 0; --i) {
    auto& rec = records_[static_cast<std::size_t>(i)];
    if (rec.output->grad.empty()) continue;
    rec.backward();
  }
  // Leaves reached by the sweep always end up with a gradient, even if every
  // contribution was zero or skipped.
  for (auto& rec : records_) {
    for (auto& in : rec.inputs) {
      if (in->requires_grad && in->tape_id < 0) in->grad_buffer();
    }
  }
  clear();
}

void Tape::clear() {
  for (auto& rec : records_) rec.output->tape_id = -1;
  records_.clear();
}

void backward(const Tensor& loss) {
  Tape* tape = active_tape();
  if (tape == nullptr) throw StateError("backward: no active tape");
  tape->backward(loss);
}

}  // namespace dghif::tc
