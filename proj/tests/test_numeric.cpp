#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "ota/gradcheck.hpp"
#include "ota/params.hpp"
#include "ota/tensor.hpp"

using namespace ota;

namespace {

Tensor rand_tensor(std::vector<int> shape, RngStream& rng, bool requires_grad = false) {
  Tensor t(std::move(shape), requires_grad);
  for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-1.0, 1.0);
  return t;
}

// finite-difference check for a single primitive: loss = sum(weights * op(x))
double primitive_grad_err(const std::function<Tensor(const Tensor&, GradTape*)>& op,
                          std::vector<int> shape, uint64_t seed) {
  RngStream rng(seed, "prim");
  ParamStore params;
  Tensor& x = params.insert("x", rand_tensor(shape, rng, true), false);
  Tensor w = rand_tensor(shape, rng);  // shape of op output assumed == input here

  auto loss_fn = [&](GradTape* tape) {
    Tensor y = op(x, tape);
    Tensor out({1});
    out.set_requires_grad(tape != nullptr);
    double s = 0.0;
    for (int64_t i = 0; i < y.size(); ++i) s += w[i] * y[i];
    out[0] = s;
    if (tape && y.requires_grad()) {
      tape->record([y, out, w]() {
        const double g = out.grad()[0];
        auto& gy = const_cast<Tensor&>(y).grad();
        for (size_t i = 0; i < gy.size(); ++i) gy[i] += g * w[static_cast<int64_t>(i)];
      });
    }
    return out;
  };
  return grad_check(params, loss_fn, 1e-5, 12, seed).max_rel_err;
}

}  // namespace

TEST_CASE("matmul hand examples") {
  Tensor eye = Tensor::from({2, 2}, {1, 0, 0, 1});
  Tensor a = Tensor::from({2, 2}, {1, 2, 3, 4});
  Tensor r = matmul(eye, a);
  for (int i = 0; i < 4; ++i) CHECK(r[i] == a[i]);

  Tensor row = Tensor::from({1, 2}, {1, 2});
  Tensor col = Tensor::from({2, 1}, {3, 4});
  CHECK(matmul(row, col)[0] == doctest::Approx(11.0));

  Tensor z = Tensor::zeros({2, 3});
  RngStream rng(1, "mm");
  Tensor b = rand_tensor({3, 4}, rng);
  Tensor out = matmul(z, b);
  for (int64_t i = 0; i < out.size(); ++i) CHECK(out[i] == 0.0);
}

TEST_CASE("matmul shape error names both shapes") {
  Tensor a({2, 3}), b({4, 5});
  CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("[2x3]"), ShapeError);
}

TEST_CASE("matmul associativity on random triples") {
  RngStream rng(7, "assoc");
  for (int trial = 0; trial < 20; ++trial) {
    Tensor a = rand_tensor({3, 4}, rng);
    Tensor b = rand_tensor({4, 5}, rng);
    Tensor c = rand_tensor({5, 2}, rng);
    Tensor left = matmul(matmul(a, b), c);
    Tensor right = matmul(a, matmul(b, c));
    for (int64_t i = 0; i < left.size(); ++i)
      CHECK(std::abs(left[i] - right[i]) <= 1e-10);
  }
}

TEST_CASE("softmax rows: uniform, shift invariance, hand value") {
  Tensor x = Tensor::from({1, 5}, {0, 0, 0, 0, 0});
  Tensor y = softmax_rows(x);
  for (int j = 0; j < 5; ++j) CHECK(y[j] == doctest::Approx(0.2).epsilon(1e-12));

  RngStream rng(3, "sm");
  Tensor a = rand_tensor({4, 6}, rng);
  Tensor shifted = a.clone();
  for (int r = 0; r < 4; ++r)
    for (int j = 0; j < 6; ++j) shifted.at(r, j) += 3.25;
  Tensor ya = softmax_rows(a), ys = softmax_rows(shifted);
  for (int64_t i = 0; i < ya.size(); ++i) CHECK(ya[i] == doctest::Approx(ys[i]).epsilon(1e-12));

  Tensor h = softmax_rows(Tensor::from({1, 2}, {0.0, std::log(3.0)}));
  CHECK(h[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(h[1] == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("softmax rows sum to one and lie in [0,1]") {
  RngStream rng(11, "smprop");
  for (int trial = 0; trial < 50; ++trial) {
    Tensor x = rand_tensor({3, 7}, rng);
    for (int64_t i = 0; i < x.size(); ++i) x[i] *= 20.0;
    Tensor y = softmax_rows(x);
    for (int r = 0; r < 3; ++r) {
      double s = 0.0;
      for (int j = 0; j < 7; ++j) {
        CHECK(y.at(r, j) >= 0.0);
        CHECK(y.at(r, j) <= 1.0);
        s += y.at(r, j);
      }
      CHECK(std::abs(s - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("layer_norm hand examples") {
  Tensor gamma = Tensor::from({3}, {1, 1, 1});
  Tensor beta = Tensor::from({3}, {0, 0, 0});
  Tensor constant = Tensor::from({1, 3}, {5, 5, 5});
  Tensor y = layer_norm(constant, gamma, beta);
  for (int j = 0; j < 3; ++j) CHECK(std::abs(y[j]) <= 1e-9);

  Tensor g2 = Tensor::from({2}, {1, 1});
  Tensor b2 = Tensor::from({2}, {0, 0});
  Tensor x = Tensor::from({1, 2}, {1, 3});
  Tensor z = layer_norm(x, g2, b2, 1e-12);
  CHECK(z[0] == doctest::Approx(-1.0).epsilon(1e-5));
  CHECK(z[1] == doctest::Approx(1.0).epsilon(1e-5));

  Tensor g0 = Tensor::from({2}, {0, 0});
  Tensor bb = Tensor::from({2}, {2.5, 2.5});
  Tensor w = layer_norm(x, g0, bb);
  CHECK(w[0] == doctest::Approx(2.5));
  CHECK(w[1] == doctest::Approx(2.5));
}

TEST_CASE("batch_norm: identical rows, eval determinism, hand stats") {
  Tensor gamma = Tensor::from({2}, {1, 1});
  Tensor beta = Tensor::from({2}, {0, 0});
  BatchNormState st;
  Tensor same = Tensor::from({3, 2}, {4, 7, 4, 7, 4, 7});
  Tensor y = batch_norm(same, gamma, beta, st, Mode::Train);
  for (int64_t i = 0; i < y.size(); ++i) CHECK(std::abs(y[i]) <= 1e-9);

  Tensor x = Tensor::from({2, 1}, {1, 3});
  Tensor g1 = Tensor::from({1}, {1});
  Tensor b1 = Tensor::from({1}, {0});
  BatchNormState st2;
  Tensor z = batch_norm(x, g1, b1, st2, Mode::Train, 1e-14);
  CHECK(z[0] == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(z[1] == doctest::Approx(1.0).epsilon(1e-6));

  // eval mode is a fixed affine map
  Tensor e1 = batch_norm(x, g1, b1, st2, Mode::Eval);
  Tensor e2 = batch_norm(x, g1, b1, st2, Mode::Eval);
  for (int64_t i = 0; i < e1.size(); ++i) CHECK(e1[i] == e2[i]);

  Tensor single({1, 2});
  BatchNormState st3;
  CHECK_THROWS_AS(batch_norm(single, gamma, beta, st3, Mode::Train), ValueError);
}

TEST_CASE("dropout contracts") {
  RngStream rng(5, "drop");
  Tensor x = rand_tensor({4, 8}, rng);

  RngStream r0(5, "d0");
  Tensor y0 = dropout(x, 0.0, r0, Mode::Train);
  for (int64_t i = 0; i < x.size(); ++i) CHECK(y0[i] == x[i]);

  RngStream r1(5, "d1");
  Tensor ye = dropout(x, 0.3, r1, Mode::Eval);
  for (int64_t i = 0; i < x.size(); ++i) CHECK(ye[i] == x[i]);

  RngStream ra(9, "mask");
  RngStream rb(9, "mask");
  Tensor ya = dropout(x, 0.5, ra, Mode::Train);
  Tensor yb = dropout(x, 0.5, rb, Mode::Train);
  for (int64_t i = 0; i < x.size(); ++i) CHECK(ya[i] == yb[i]);

  CHECK_THROWS_AS(dropout(x, 1.0, ra, Mode::Train), ValueError);
}

TEST_CASE("rng determinism and stream independence") {
  RngStream a(123, "s");
  RngStream b(123, "s");
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  RngStream c(123, "other");
  CHECK(RngStream(123, "s").next_u64() != c.next_u64());
}

TEST_CASE("primitive gradients match central differences") {
  CHECK(primitive_grad_err([](const Tensor& x, GradTape* t) { return relu(x, t); }, {3, 5},
                           1) <= 1e-4);
  CHECK(primitive_grad_err(
            [](const Tensor& x, GradTape* t) { return softmax_rows(x, t); }, {3, 5}, 2) <=
        1e-4);
  CHECK(primitive_grad_err([](const Tensor& x, GradTape* t) { return scale(x, -2.5, t); },
                           {4, 4}, 3) <= 1e-4);

  // layer norm (params: x, gamma, beta)
  {
    RngStream rng(4, "ln");
    ParamStore p;
    p.insert("x", rand_tensor({3, 6}, rng, true), false);
    p.insert("gamma", rand_tensor({6}, rng, true), false);
    p.insert("beta", rand_tensor({6}, rng, true), false);
    Tensor w = rand_tensor({3, 6}, rng);
    auto loss_fn = [&](GradTape* tape) {
      Tensor y = layer_norm(p["x"], p["gamma"], p["beta"], 1e-5, tape);
      Tensor out({1});
      out.set_requires_grad(tape != nullptr);
      for (int64_t i = 0; i < y.size(); ++i) out[0] += w[i] * y[i];
      if (tape) {
        tape->record([y, out, w]() {
          auto& gy = const_cast<Tensor&>(y).grad();
          for (size_t i = 0; i < gy.size(); ++i)
            gy[i] += out.grad()[0] * w[static_cast<int64_t>(i)];
        });
      }
      return out;
    };
    CHECK(grad_check(p, loss_fn, 1e-5, 20, 4).max_rel_err <= 1e-4);
  }

  // matmul both sides
  {
    RngStream rng(6, "mmg");
    ParamStore p;
    p.insert("a", rand_tensor({3, 4}, rng, true), false);
    p.insert("b", rand_tensor({4, 2}, rng, true), false);
    Tensor w = rand_tensor({3, 2}, rng);
    auto loss_fn = [&](GradTape* tape) {
      Tensor y = matmul(p["a"], p["b"], tape);
      Tensor out({1});
      out.set_requires_grad(tape != nullptr);
      for (int64_t i = 0; i < y.size(); ++i) out[0] += w[i] * y[i];
      if (tape) {
        tape->record([y, out, w]() {
          auto& gy = const_cast<Tensor&>(y).grad();
          for (size_t i = 0; i < gy.size(); ++i)
            gy[i] += out.grad()[0] * w[static_cast<int64_t>(i)];
        });
      }
      return out;
    };
    CHECK(grad_check(p, loss_fn, 1e-5, 20, 6).max_rel_err <= 1e-4);
  }

  // masked attention (q, k, v) with a padded position
  {
    RngStream rng(8, "attn");
    const int batch = 2, len = 3, d = 4;
    ParamStore p;
    p.insert("q", rand_tensor({batch * len, d}, rng, true), false);
    p.insert("k", rand_tensor({batch * len, d}, rng, true), false);
    p.insert("v", rand_tensor({batch * len, d}, rng, true), false);
    std::vector<uint8_t> mask = {1, 1, 1, 1, 1, 0};
    Tensor w = rand_tensor({batch * len, d}, rng);
    auto loss_fn = [&](GradTape* tape) {
      Tensor y = masked_attention(p["q"], p["k"], p["v"], mask, batch, len, 2, tape);
      Tensor out({1});
      out.set_requires_grad(tape != nullptr);
      for (int64_t i = 0; i < y.size(); ++i) out[0] += w[i] * y[i];
      if (tape) {
        tape->record([y, out, w]() {
          auto& gy = const_cast<Tensor&>(y).grad();
          for (size_t i = 0; i < gy.size(); ++i)
            gy[i] += out.grad()[0] * w[static_cast<int64_t>(i)];
        });
      }
      return out;
    };
    CHECK(grad_check(p, loss_fn, 1e-5, 24, 8).max_rel_err <= 1e-4);
  }
}

TEST_CASE("grad_check oracle sanity: f = theta^2 at theta = 3") {
  ParamStore p;
  Tensor& theta = p.insert("theta", Tensor::from({1}, {3.0}, true), false);
  auto loss_fn = [&](GradTape* tape) {
    Tensor out({1});
    out.set_requires_grad(tape != nullptr);
    out[0] = theta[0] * theta[0];
    if (tape) {
      tape->record([&theta, out]() { theta.grad()[0] += 2.0 * theta[0] * out.grad()[0]; });
    }
    return out;
  };
  auto report = grad_check(p, loss_fn, 1e-5, 8, 0);
  CHECK(report.max_rel_err <= 1e-9);

  // constant function: all gradients zero, exact match
  Tensor& c = p.insert("c", Tensor::from({2}, {1.0, -1.0}, true), false);
  (void)c;
  auto const_fn = [&](GradTape* tape) {
    Tensor out({1});
    out.set_requires_grad(tape != nullptr);
    out[0] = 7.0;
    return out;
  };
  CHECK(grad_check(p, const_fn, 1e-5, 8, 0).max_rel_err == 0.0);
}

TEST_CASE("tape replays each recorded op exactly once") {
  int count = 0;
  GradTape tape;
  Tensor x = Tensor::from({2, 2}, {1, 2, 3, 4}, true);
  Tensor y = relu(x, &tape);
  tape.record([&count]() { ++count; });
  Tensor loss({1});
  loss.set_requires_grad(true);
  loss[0] = y[0];
  tape.record([y, loss]() { const_cast<Tensor&>(y).grad()[0] += loss.grad()[0]; });
  tape.backward(loss);
  CHECK(count == 1);
  CHECK(x.grad()[0] == 1.0);
}

TEST_CASE("smoothed cross entropy basics (numeric-core surface)") {
  // uniform logits -> ln 5 regardless of alpha
  Tensor logits = Tensor::from({2, 5}, std::vector<double>(10, 0.7));
  for (double alpha : {0.0, 0.1, 0.5}) {
    Tensor loss = smoothed_cross_entropy(logits, {0, 3}, alpha);
    CHECK(std::abs(loss[0] - std::log(5.0)) <= 1e-9);
  }
}

TEST_CASE("pooling and concat primitives") {
  // masked mean pool
  Tensor h = Tensor::from({2, 1}, {2, 99});  // batch=1, len=2, d=1
  std::vector<uint8_t> mask = {1, 0};
  Tensor pooled = masked_mean_pool(h, mask, 1, 2);
  CHECK(pooled[0] == doctest::Approx(2.0));

  Tensor h2 = Tensor::from({2, 1}, {2, 4});
  std::vector<uint8_t> both = {1, 1};
  CHECK(masked_mean_pool(h2, both, 1, 2)[0] == doctest::Approx(3.0));

  std::vector<uint8_t> none = {0, 0};
  CHECK_THROWS_AS(masked_mean_pool(h2, none, 1, 2), ValueError);

  // concat broadcast
  Tensor rows = Tensor::from({1, 2}, {1, 2});
  Tensor vec = Tensor::from({1}, {3});
  Tensor fused = concat_broadcast(rows, vec);
  CHECK(fused.shape() == std::vector<int>{1, 3});
  CHECK(fused[0] == 1.0);
  CHECK(fused[1] == 2.0);
  CHECK(fused[2] == 3.0);

  // col mean
  Tensor m = Tensor::from({2, 2}, {1, 2, 3, 4});
  Tensor cm = col_mean(m);
  CHECK(cm[0] == doctest::Approx(2.0));
  CHECK(cm[1] == doctest::Approx(3.0));
}

TEST_CASE("all outputs finite on finite inputs") {
  RngStream rng(13, "finite");
  Tensor x = rand_tensor({4, 6}, rng);
  for (int64_t i = 0; i < x.size(); ++i) x[i] *= 50.0;
  CHECK(softmax_rows(x).all_finite());
  Tensor g = Tensor::from({6}, std::vector<double>(6, 1.0));
  Tensor b = Tensor::from({6}, std::vector<double>(6, 0.0));
  CHECK(layer_norm(x, g, b).all_finite());
  CHECK(relu(x).all_finite());
}
