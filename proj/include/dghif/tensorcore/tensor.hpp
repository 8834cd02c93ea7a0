#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace dghif::tc {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape) noexcept;
std::string to_string(const Shape& shape);

/// Storage shared between a Tensor handle and the tape records that use it.
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until a gradient reaches this node
  bool requires_grad = false;
  std::int64_t tape_id = -1;  // index of the producing record; -1 for leaves

  /// Gradient storage, zero-filled on first access.
  std::span<double> grad_buffer();
};

/// Handle to a dense row-major array of doubles. Copies share storage.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_values(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const noexcept { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const { return node_->value.size(); }
  bool is_scalar() const { return numel() == 1; }

  std::span<const double> values() const { return node_->value; }
  std::span<double> mutable_values() { return node_->value; }
  double item() const;
  double at(std::size_t i) const { return node_->value.at(i); }
  double at(std::size_t row, std::size_t col) const;

  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() { return node_->grad_buffer(); }
  void zero_grad() { node_->grad.clear(); }

  bool requires_grad() const { return node_->requires_grad; }
  Tensor& set_requires_grad(bool flag);
  std::int64_t tape_id() const { return node_->tape_id; }

  /// Value copy that does not participate in gradient tracking.
  Tensor detach() const;

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// Ordered record of differentiable operations. Records are appended in
/// execution order, so every input precedes the op that consumes it.
class Tape {
 public:
  struct Record {
    const char* op;
    std::vector<std::shared_ptr<Node>> inputs;
    std::shared_ptr<Node> output;
    std::function<void()> backward;  // accumulates into input grads
  };

  std::int64_t push(Record record);
  std::size_t size() const noexcept { return records_.size(); }
  const Record& record(std::size_t i) const { return records_.at(i); }

  /// Reverse-mode sweep from a scalar loss, then clears the tape.
  void backward(const Tensor& loss);
  void clear();

 private:
  std::vector<Record> records_;
};

/// Tape that receives records from ops on the calling thread, or nullptr.
Tape* active_tape() noexcept;

/// Installs a tape as the calling thread's active tape for its lifetime.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape) noexcept;
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

/// Disables recording on the calling thread for its lifetime.
class NoGradScope {
 public:
  NoGradScope() noexcept;
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape* previous_;
};

/// Runs backward on the active tape. Throws ShapeError for a non-scalar loss
/// and StateError when no tape is active or the loss is not on it.
void backward(const Tensor& loss);

}  // namespace dghif::tc
