#include "ukan/tensor.hpp"

#include <atomic>
#include <sstream>

namespace ukan {

namespace {

std::atomic<LeafId> next_leaf_id{1};
std::atomic<std::uint64_t> next_tape_serial{1};
thread_local Tape* current_tape = nullptr;

}  // namespace

const char* dtype_name(DType dt) { return dt == DType::f32 ? "float32" : "float64"; }

std::int64_t shape_numel(const Shape& shape) {
    std::int64_t n = 1;
    for (auto e : shape) {
        if (e <= 0) throw ShapeError("extents must be positive, got " + shape_str(shape));
        n *= e;
    }
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
}

Tensor::Tensor(Shape shape, DType dtype)
    : shape_(std::move(shape)), numel_(shape_numel(shape_)), dtype_(dtype) {
    if (dtype_ == DType::f32)
        storage_ = std::make_shared<Storage>(std::vector<float>(numel_, 0.0f));
    else
        storage_ = std::make_shared<Storage>(std::vector<double>(numel_, 0.0));
}

Tensor Tensor::full(Shape shape, double value, DType dtype) {
    Tensor t(std::move(shape), dtype);
    dispatch(dtype, [&]<class T>(T) {
        for (auto& v : t.mutable_data<T>()) v = static_cast<T>(value);
    });
    return t;
}

Tensor Tensor::from_vector(Shape shape, const std::vector<double>& values, DType dtype) {
    Tensor t(std::move(shape), dtype);
    if (static_cast<std::int64_t>(values.size()) != t.numel())
        throw ShapeError("value count " + std::to_string(values.size()) + " does not match shape " +
                         shape_str(t.shape()));
    dispatch(dtype, [&]<class T>(T) {
        auto d = t.mutable_data<T>();
        for (std::size_t i = 0; i < values.size(); ++i) d[i] = static_cast<T>(values[i]);
    });
    return t;
}

Tensor Tensor::from_floats(Shape shape, std::vector<float> values) {
    Tensor t;
    t.shape_ = std::move(shape);
    t.numel_ = shape_numel(t.shape_);
    if (static_cast<std::int64_t>(values.size()) != t.numel_)
        throw ShapeError("value count does not match shape " + shape_str(t.shape_));
    t.dtype_ = DType::f32;
    t.storage_ = std::make_shared<Storage>(std::move(values));
    return t;
}

Tensor Tensor::from_doubles(Shape shape, std::vector<double> values) {
    Tensor t;
    t.shape_ = std::move(shape);
    t.numel_ = shape_numel(t.shape_);
    if (static_cast<std::int64_t>(values.size()) != t.numel_)
        throw ShapeError("value count does not match shape " + shape_str(t.shape_));
    t.dtype_ = DType::f64;
    t.storage_ = std::make_shared<Storage>(std::move(values));
    return t;
}

std::int64_t Tensor::dim(int axis) const {
    if (axis < 0) axis += rank();
    if (axis < 0 || axis >= rank())
        throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_str(shape_));
    return shape_[axis];
}

template <class T>
std::span<const T> Tensor::data() const {
    if (!storage_) throw Error("access to undefined tensor");
    auto* v = std::get_if<std::vector<T>>(storage_.get());
    if (!v) throw DTypeError(std::string("tensor holds ") + dtype_name(dtype_));
    return {v->data(), v->size()};
}

template <class T>
std::span<T> Tensor::mutable_data() {
    if (!storage_) throw Error("access to undefined tensor");
    auto* v = std::get_if<std::vector<T>>(storage_.get());
    if (!v) throw DTypeError(std::string("tensor holds ") + dtype_name(dtype_));
    return {v->data(), v->size()};
}

template std::span<const float> Tensor::data<float>() const;
template std::span<const double> Tensor::data<double>() const;
template std::span<float> Tensor::mutable_data<float>();
template std::span<double> Tensor::mutable_data<double>();

double Tensor::at(std::int64_t i) const {
    if (i < 0 || i >= numel_) throw ShapeError("flat index out of range");
    return dispatch(dtype_, [&]<class T>(T) { return static_cast<double>(data<T>()[i]); });
}

double Tensor::item() const {
    if (numel_ != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape_));
    return at(0);
}

std::vector<double> Tensor::to_vector() const {
    return dispatch(dtype_, [&]<class T>(T) {
        auto d = data<T>();
        return std::vector<double>(d.begin(), d.end());
    });
}

Tensor Tensor::view_as(Shape shape) const {
    Tensor t = *this;
    t.shape_ = std::move(shape);
    if (shape_numel(t.shape_) != numel_)
        throw ShapeError("cannot view " + shape_str(shape_) + " as " + shape_str(t.shape_));
    t.requires_grad_ = false;
    t.node_ = -1;
    t.tape_serial_ = 0;
    return t;
}

Tensor Tensor::clone() const {
    Tensor t = *this;
    t.storage_ = std::make_shared<Storage>(*storage_);
    t.requires_grad_ = false;
    t.leaf_id_ = 0;
    t.node_ = -1;
    t.tape_serial_ = 0;
    return t;
}

Tensor Tensor::to(DType dtype) const {
    if (dtype == dtype_) return clone();
    Tensor out(shape_, dtype);
    dispatch(dtype_, [&]<class S>(S) {
        auto src = data<S>();
        dispatch(dtype, [&]<class D>(D) {
            auto dst = out.mutable_data<D>();
            for (std::int64_t i = 0; i < numel_; ++i) dst[i] = static_cast<D>(src[i]);
        });
    });
    return out;
}

Tensor& Tensor::set_requires_grad(bool flag) {
    requires_grad_ = flag;
    if (flag && leaf_id_ == 0) leaf_id_ = next_leaf_id.fetch_add(1);
    return *this;
}

std::optional<NodeId> Tensor::node() const {
    if (node_ < 0) return std::nullopt;
    return node_;
}

Tensor Tensor::detach() const {
    Tensor t = *this;
    t.requires_grad_ = false;
    t.leaf_id_ = 0;
    t.node_ = -1;
    t.tape_serial_ = 0;
    return t;
}

const Tensor& GradientMap::at(const Tensor& leaf) const {
    auto it = grads_.find(leaf.leaf_id());
    if (it == grads_.end()) throw AutogradError("no gradient recorded for leaf");
    return it->second;
}

const Tensor* GradientMap::find(const Tensor& leaf) const {
    auto it = grads_.find(leaf.leaf_id());
    return it == grads_.end() ? nullptr : &it->second;
}

Tape::Tape() : serial_(next_tape_serial.fetch_add(1)) {}

bool Tape::tracks(const Tensor& t) const {
    if (!t.defined()) return false;
    if (t.node() && t.tape_serial() == serial_) return true;
    return t.requires_grad();
}

NodeId Tape::node_for(const Tensor& t) {
    if (t.node() && t.tape_serial() == serial_) return *t.node();
    if (!t.requires_grad()) return -1;
    auto it = leaf_nodes_.find(t.leaf_id());
    if (it != leaf_nodes_.end()) return it->second;
    TapeNode leaf;
    leaf.op = "leaf";
    leaf.shape = t.shape();
    leaf.dtype = t.dtype();
    leaf.leaf = t.leaf_id();
    nodes_.push_back(std::move(leaf));
    NodeId id = static_cast<NodeId>(nodes_.size()) - 1;
    leaf_nodes_.emplace(t.leaf_id(), id);
    return id;
}

void Tape::record(Tensor& out, std::string op, const std::vector<const Tensor*>& inputs,
                  BackwardFn backward) {
    TapeNode node;
    node.op = std::move(op);
    node.parents.reserve(inputs.size());
    for (const Tensor* in : inputs) node.parents.push_back(in ? node_for(*in) : -1);
    node.backward = std::move(backward);
    node.shape = out.shape();
    node.dtype = out.dtype();
    nodes_.push_back(std::move(node));
    out.attach(serial_, static_cast<NodeId>(nodes_.size()) - 1);
}

namespace {

void accumulate(Tensor& slot, const Tensor& g) {
    if (!slot.defined()) {
        slot = g;
        return;
    }
    if (slot.shape() != g.shape()) throw AutogradError("gradient shape mismatch during accumulation");
    // Accumulated slots may alias a saved gradient; copy before writing.
    Tensor sum = slot.clone();
    dispatch(sum.dtype(), [&]<class T>(T) {
        auto s = sum.mutable_data<T>();
        auto a = g.data<T>();
        for (std::size_t i = 0; i < s.size(); ++i) s[i] += a[i];
    });
    slot = sum;
}

}  // namespace

GradientMap Tape::backward(const Tensor& loss) {
    if (loss.numel() != 1) throw AutogradError("loss must be a single-element tensor, got " +
                                               shape_str(loss.shape()));
    if (!loss.node() || loss.tape_serial() != serial_)
        throw AutogradError("loss is not recorded on this tape");

    NoGradScope no_grad;
    std::vector<Tensor> grads(nodes_.size());
    grads[*loss.node()] = Tensor::full(loss.shape(), 1.0, loss.dtype());

    GradientMap result;
    for (NodeId id = *loss.node(); id >= 0; --id) {
        const TapeNode& node = nodes_[id];
        Tensor& g = grads[id];
        if (!g.defined()) continue;
        if (node.leaf) {
            result.set(*node.leaf, g);
            continue;
        }
        std::vector<bool> needs(node.parents.size());
        bool any = false;
        for (std::size_t i = 0; i < node.parents.size(); ++i) {
            needs[i] = node.parents[i] >= 0;
            any = any || needs[i];
        }
        if (!any || !node.backward) continue;
        std::vector<Tensor> parent_grads(node.parents.size());
        node.backward(g, needs, parent_grads);
        for (std::size_t i = 0; i < node.parents.size(); ++i) {
            if (!needs[i] || !parent_grads[i].defined()) continue;
            const TapeNode& parent = nodes_[node.parents[i]];
            if (parent_grads[i].shape() != parent.shape)
                throw AutogradError("op '" + node.op + "' produced gradient of shape " +
                                    shape_str(parent_grads[i].shape()) + " for input of shape " +
                                    shape_str(parent.shape));
            accumulate(grads[node.parents[i]], parent_grads[i]);
        }
        g = Tensor();
    }
    return result;
}

Tape* active_tape() { return current_tape; }

GradScope::GradScope(Tape& tape) : previous_(current_tape) { current_tape = &tape; }
GradScope::~GradScope() { current_tape = previous_; }

NoGradScope::NoGradScope() : previous_(current_tape) { current_tape = nullptr; }
NoGradScope::~NoGradScope() { current_tape = previous_; }

void record_op(Tensor& out, const char* op, const std::vector<const Tensor*>& inputs,
               BackwardFn backward) {
    Tape* tape = current_tape;
    if (!tape) return;
    bool any = false;
    for (const Tensor* in : inputs) any = any || (in && tape->tracks(*in));
    if (!any) return;
    tape->record(out, op, inputs, std::move(backward));
}

GradientMap backward(const Tensor& loss) {
    Tape* tape = current_tape;
    if (!tape) throw AutogradError("backward called with no active tape");
    return tape->backward(loss);
}

}  // namespace ukan
