#include "doctest.h"

#include <cmath>

#include "wela/param_store.hpp"
#include "wela/rng.hpp"
#include "wela/tensor.hpp"

using namespace wela;

namespace {

Tensor random_tensor(std::vector<index_t> shape, Rng& rng, double scale = 1.0) {
    Tensor t(std::move(shape));
    for (float& v : t.data) v = static_cast<float>(rng.uniform(-scale, scale));
    return t;
}

/// Naive triple-loop matmul oracle in double.
TensorD matmul_oracle(const Tensor& x, const Tensor& w, const Tensor& b) {
    TensorD out({x.rows(), w.cols()});
    for (index_t i = 0; i < x.rows(); ++i)
        for (index_t j = 0; j < w.cols(); ++j) {
            double acc = b[j];
            for (index_t k = 0; k < x.cols(); ++k)
                acc += static_cast<double>(x.at(i, k)) * static_cast<double>(w.at(k, j));
            out.at(i, j) = acc;
        }
    return out;
}

}  // namespace

TEST_CASE("affine_forward identity and unit-basis cases") {
    const Tensor x = Tensor::from_rows({{1.0f, 2.0f}});
    const Tensor eye = Tensor::from_rows({{1.0f, 0.0f}, {0.0f, 1.0f}});
    const Tensor zero_b({2});
    const Tensor out = affine_forward(x, eye, zero_b);
    CHECK(out.at(0, 0) == doctest::Approx(1.0));
    CHECK(out.at(0, 1) == doctest::Approx(2.0));

    const Tensor basis = Tensor::from_rows({{1.0f, 0.0f}, {0.0f, 1.0f}});
    const Tensor w = Tensor::from_rows({{2.0f, 3.0f}, {4.0f, 5.0f}});
    const Tensor ones({2}, {1.0f, 1.0f});
    const Tensor out2 = affine_forward(basis, w, ones);
    CHECK(out2.at(0, 0) == doctest::Approx(3.0));
    CHECK(out2.at(0, 1) == doctest::Approx(4.0));
    CHECK(out2.at(1, 0) == doctest::Approx(5.0));
    CHECK(out2.at(1, 1) == doctest::Approx(6.0));
}

TEST_CASE("affine_forward matches triple-loop oracle") {
    Rng rng(11);
    const Tensor x = random_tensor({3, 5}, rng);
    const Tensor w = random_tensor({5, 4}, rng);
    const Tensor b = random_tensor({4}, rng);
    const Tensor out = affine_forward(x, w, b);
    const TensorD expect = matmul_oracle(x, w, b);
    for (index_t i = 0; i < out.numel(); ++i)
        CHECK(out[i] == doctest::Approx(expect[i]).epsilon(1e-5));
}

TEST_CASE("affine_forward rejects mismatched shapes with both shapes named") {
    const Tensor x({2, 3});
    const Tensor w({4, 2});
    const Tensor b({2});
    try {
        affine_forward(x, w, b);
        FAIL("expected a dimension error");
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[2 3]") != std::string::npos);
        CHECK(msg.find("[4 2]") != std::string::npos);
    }
}

TEST_CASE("affine_backward zero upstream gradient gives zero gradients") {
    Rng rng(7);
    const Tensor x = random_tensor({4, 3}, rng);
    const Tensor w = random_tensor({3, 2}, rng);
    const Tensor g0 = Tensor::zeros({4, 2});
    Tensor gx = Tensor::zeros(x.shape), gw = Tensor::zeros(w.shape), gb = Tensor::zeros({2});
    affine_backward(g0, x, w, gx, gw, gb);
    for (float v : gx.data) CHECK(v == 0.0f);
    for (float v : gw.data) CHECK(v == 0.0f);
    for (float v : gb.data) CHECK(v == 0.0f);
}

TEST_CASE("affine_backward scalar chain rule") {
    const Tensor x = Tensor::from_rows({{2.0f}});
    const Tensor w = Tensor::from_rows({{3.0f}});
    const Tensor g = Tensor::from_rows({{1.0f}});
    Tensor gx = Tensor::zeros({1, 1}), gw = Tensor::zeros({1, 1}), gb = Tensor::zeros({1});
    affine_backward(g, x, w, gx, gw, gb);
    CHECK(gx.at(0, 0) == doctest::Approx(3.0));
    CHECK(gw.at(0, 0) == doctest::Approx(2.0));
    CHECK(gb[0] == doctest::Approx(1.0));
}

TEST_CASE("affine_backward agrees with central differences") {
    Rng rng(23);
    const Tensor x = random_tensor({3, 4}, rng);
    const Tensor w = random_tensor({4, 2}, rng);
    const Tensor b = random_tensor({2}, rng);
    const Tensor s = random_tensor({3, 2}, rng);  // projection making the loss scalar

    Tensor gx = Tensor::zeros(x.shape), gw = Tensor::zeros(w.shape), gb = Tensor::zeros(b.shape);
    affine_backward(s, x, w, gx, gw, gb);

    // loss = sum_ij s_ij * out_ij, evaluated in double
    auto loss = [&](const TensorD& xd, const TensorD& wd, const TensorD& bd) {
        double acc = 0.0;
        for (index_t i = 0; i < xd.rows(); ++i)
            for (index_t j = 0; j < wd.cols(); ++j) {
                double o = bd[j];
                for (index_t k = 0; k < xd.cols(); ++k) o += xd.at(i, k) * wd.at(k, j);
                acc += static_cast<double>(s.at(i, j)) * o;
            }
        return acc;
    };
    const double h = 1e-3;
    auto check_grads = [&](TensorD pert, const Tensor& analytic, int which) {
        TensorD xd = x.cast<double>(), wd = w.cast<double>(), bd = b.cast<double>();
        TensorD* target = which == 0 ? &xd : which == 1 ? &wd : &bd;
        *target = pert;
        for (index_t i = 0; i < pert.numel(); ++i) {
            const double backup = (*target)[i];
            (*target)[i] = backup + h;
            const double lp = loss(xd, wd, bd);
            (*target)[i] = backup - h;
            const double lm = loss(xd, wd, bd);
            (*target)[i] = backup;
            const double numeric = (lp - lm) / (2 * h);
            const double rel = std::abs(numeric - analytic[i]) /
                               std::max(1e-8, std::abs(numeric) + std::abs(analytic[i]));
            CHECK(rel < 1e-3);
        }
    };
    check_grads(x.cast<double>(), gx, 0);
    check_grads(w.cast<double>(), gw, 1);
    check_grads(b.cast<double>(), gb, 2);
}

TEST_CASE("relu forward and subgradient at zero") {
    const Tensor x({3}, {-1.0f, 0.0f, 2.0f});
    const Tensor out = relu(x);
    CHECK(out[0] == 0.0f);
    CHECK(out[1] == 0.0f);
    CHECK(out[2] == 2.0f);

    const Tensor g({3}, {5.0f, 5.0f, 5.0f});
    const Tensor gx = relu_backward(g, x);
    CHECK(gx[0] == 0.0f);
    CHECK(gx[1] == 0.0f);  // gradient defined as 0 exactly at 0
    CHECK(gx[2] == 5.0f);
}

TEST_CASE("relu consistent with finite differences away from zero") {
    Rng rng(5);
    Tensor x = random_tensor({16}, rng, 2.0);
    for (float& v : x.data)
        if (std::abs(v) < 0.05f) v += 0.1f;  // keep clear of the kink
    const Tensor g = Tensor::full({16}, 1.0f);
    const Tensor gx = relu_backward(g, x);
    const double h = 1e-3;
    for (index_t i = 0; i < x.numel(); ++i) {
        const double vp = std::max(0.0, static_cast<double>(x[i]) + h);
        const double vm = std::max(0.0, static_cast<double>(x[i]) - h);
        CHECK(gx[i] == doctest::Approx((vp - vm) / (2 * h)).epsilon(1e-6));
    }
}

TEST_CASE("adam zero gradient is a no-op on parameters for all t") {
    ParamStore params;
    Tensor& th = params.create("theta", {3});
    th.data = {1.0f, -2.0f, 0.5f};
    AdamState state = AdamState::init(params, 1e-2);
    for (int t = 0; t < 5; ++t) adam_step(params, state);
    CHECK(state.step_count == 5);
    CHECK(params.value("theta").data == std::vector<float>{1.0f, -2.0f, 0.5f});
}

TEST_CASE("adam first bias-corrected step is about -lr * sign(g)") {
    ParamStore params;
    params.create("theta", {1});
    params.grad("theta")[0] = 1.0f;
    AdamState state = AdamState::init(params, 1e-4);
    adam_step(params, state);
    CHECK(state.step_count == 1);
    CHECK(params.value("theta")[0] == doctest::Approx(-1e-4).epsilon(1e-3));
}

TEST_CASE("adam two constant-gradient steps match the scalar recurrence oracle") {
    ParamStore params;
    params.create("theta", {1});
    AdamState state = AdamState::init(params, 1e-4);

    // Hand-rolled recurrence in double.
    double m = 0.0, v = 0.0, theta = 0.0;
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8, lr = 1e-4, g = 1.0;
    for (int t = 1; t <= 2; ++t) {
        params.grad("theta")[0] = static_cast<float>(g);
        adam_step(params, state);
        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g * g;
        const double mhat = m / (1 - std::pow(b1, t));
        const double vhat = v / (1 - std::pow(b2, t));
        theta -= lr * mhat / (std::sqrt(vhat) + eps);
    }
    CHECK(std::abs(params.value("theta")[0] - theta) < 1e-7);
}

TEST_CASE("adam requires initialized state") {
    ParamStore params;
    params.create("theta", {1});
    AdamState empty;
    CHECK_THROWS_AS(adam_step(params, empty), std::invalid_argument);
}

TEST_CASE("grad_check accepts an exact quadratic gradient") {
    ParamStore params;
    Tensor& th = params.create("theta", {4});
    Rng rng(3);
    for (float& v : th.data) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    for (index_t i = 0; i < 4; ++i) params.grad("theta")[i] = th[i];  // d/dθ of ||θ||²/2

    auto loss = [](const ParamStoreD& p) {
        double acc = 0.0;
        for (double v : p.value("theta").data) acc += 0.5 * v * v;
        return acc;
    };
    const GradCheckReport report = grad_check(loss, params, 1e-3);
    CHECK(report.max_rel_err < 1e-5);
}

TEST_CASE("grad_check flags a corrupted gradient") {
    ParamStore params;
    Tensor& th = params.create("theta", {4});
    th.data = {0.5f, -0.25f, 1.0f, 0.75f};
    for (index_t i = 0; i < 4; ++i) params.grad("theta")[i] = th[i];
    params.grad("theta")[2] *= 2.0f;  // deliberate corruption

    auto loss = [](const ParamStoreD& p) {
        double acc = 0.0;
        for (double v : p.value("theta").data) acc += 0.5 * v * v;
        return acc;
    };
    const GradCheckReport report = grad_check(loss, params, 1e-3);
    CHECK(report.max_rel_err > 0.3);
    CHECK(report.worst_param == "theta");
    CHECK(report.worst_coord == 2);
}

TEST_CASE("composed affine-relu-affine gradient passes grad_check") {
    Rng rng(17);
    ParamStore params;
    Tensor& w1 = params.create("w1", {3, 4});
    Tensor& b1 = params.create("b1", {4});
    Tensor& w2 = params.create("w2", {4, 2});
    Tensor& b2 = params.create("b2", {2});
    for (auto* t : {&w1, &b1, &w2, &b2})
        for (float& v : t->data) v = static_cast<float>(rng.uniform(-0.8, 0.8));
    const Tensor x = random_tensor({5, 3}, rng);

    // forward + analytic backward with loss = mean of outputs
    const Tensor pre = affine_forward(x, w1, b1);
    const Tensor h = relu(pre);
    const Tensor out = affine_forward(h, w2, b2);
    Tensor gout = Tensor::full(out.shape, 1.0f / static_cast<float>(out.numel()));
    Tensor gh = Tensor::zeros(h.shape);
    affine_backward(gout, h, w2, gh, params.grad("w2"), params.grad("b2"));
    const Tensor gpre = relu_backward(gh, pre);
    Tensor gx = Tensor::zeros(x.shape);
    affine_backward(gpre, x, w1, gx, params.grad("w1"), params.grad("b1"));

    auto loss = [&](const ParamStoreD& p) {
        const TensorD xd = x.cast<double>();
        const TensorD hd = relu(affine_forward(xd, p.value("w1"), p.value("b1")));
        const TensorD od = affine_forward(hd, p.value("w2"), p.value("b2"));
        double acc = 0.0;
        for (double v : od.data) acc += v;
        return acc / static_cast<double>(od.numel());
    };
    const GradCheckReport report = grad_check(loss, params, 1e-3);
    CHECK(report.max_rel_err < 1e-3);
}

TEST_CASE("rng streams are deterministic and seed-separated") {
    Rng a(42), b(42), c(43);
    for (int i = 0; i < 100; ++i) {
        const double va = a.normal();
        CHECK(va == b.normal());
        (void)c.normal();
    }
    CHECK(derive_seed(1, 2) != derive_seed(1, 3));
    CHECK(derive_seed(1, 2) != derive_seed(2, 2));
    CHECK(derive_seed(1, 2) == derive_seed(1, 2));
}
