#include <cmath>
#include <cstring>
#include <map>

#include "doctest.h"
#include "gfv/tensor.hpp"
#include "testers.hpp"

using namespace gfv;
using gfv::testing::fd_max_rel_err;
using gfv::testing::rand_tensor;

namespace {

// Independent reference: plain triple loop.
std::vector<double> naive_matmul(const std::vector<double>& a, const std::vector<double>& b,
                                 int m, int k, int n) {
  std::vector<double> c(static_cast<size_t>(m) * n, 0.0);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int kk = 0; kk < k; ++kk)
        s += a[static_cast<size_t>(i) * k + kk] * b[static_cast<size_t>(kk) * n + j];
      c[static_cast<size_t>(i) * n + j] = s;
    }
  return c;
}

}  // namespace

TEST_CASE("tensor construction and accessors") {
  Tensor t = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK(t.size() == 6);
  CHECK(t.at(1, 2) == 6.0);
  CHECK_THROWS_AS(t.at(2, 0), IndexError);
  CHECK_THROWS_AS(t.item(), ContractError);
  CHECK(Tensor::scalar(3.5).item() == 3.5);
  CHECK_THROWS_AS(Tensor::from_data({2, 2}, {1, 2, 3}), ShapeError);
  CHECK_THROWS_AS(Tensor::zeros({0}), ShapeError);
  CHECK_THROWS_AS(Tensor::zeros({2, 2, 2}), ShapeError);

  Tensor alias = t;  // copies share storage
  alias.data()[0] = 9.0;
  CHECK(t.at(0, 0) == 9.0);
  Tensor copy = t.detached_copy();
  copy.data()[0] = 1.0;
  CHECK(t.at(0, 0) == 9.0);
  CHECK(copy.id() != t.id());
}

TEST_CASE("matmul matches triple-loop reference") {
  Rng rng = make_rng(11);
  for (auto [m, k, n] : {std::tuple{3, 4, 5}, {1, 7, 33}, {17, 65, 31}, {64, 64, 64}}) {
    Tensor a = rand_tensor({m, k}, rng, false);
    Tensor b = rand_tensor({k, n}, rng, false);
    Tensor c = matmul(a, b);
    std::vector<double> ref = naive_matmul(
        {a.data(), a.data() + a.size()}, {b.data(), b.data() + b.size()}, m, k, n);
    for (int64_t i = 0; i < c.size(); ++i)
      CHECK(c.data()[i] == doctest::Approx(ref[i]).epsilon(1e-12));
  }
  CHECK_THROWS_AS(matmul(Tensor::zeros({2, 3}), Tensor::zeros({4, 2})), ShapeError);
}

TEST_CASE("matmul kernel rows are independent of the call height") {
  Rng rng = make_rng(12);
  for (auto [m, k, n] : {std::tuple{5, 32, 257}, {9, 257, 32}, {4, 128, 100}}) {
    Tensor a = rand_tensor({m, k}, rng, false);
    Tensor b = rand_tensor({k, n}, rng, false);
    std::vector<double> full(static_cast<size_t>(m) * n), one(n);
    kernel::matmul_nn(a.data(), b.data(), full.data(), m, k, n);
    for (int i = 0; i < m; ++i) {
      kernel::matmul_nn(a.data() + static_cast<size_t>(i) * k, b.data(), one.data(), 1, k, n);
      CHECK(std::memcmp(one.data(), full.data() + static_cast<size_t>(i) * n,
                        sizeof(double) * n) == 0);
    }
  }
}

TEST_CASE("softmax rows") {
  Tensor x = Tensor::from_data({1, 2}, {0.0, 0.0});
  Tensor y = softmax_rows(x);
  CHECK(y.at(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(y.at(0, 1) == doctest::Approx(0.5).epsilon(1e-15));

  // Large logits must not overflow.
  Tensor big = Tensor::from_data({1, 2}, {1000.0, 0.0});
  Tensor yb = softmax_rows(big);
  CHECK(std::isfinite(yb.at(0, 0)));
  CHECK(yb.at(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(yb.at(0, 0) + yb.at(0, 1) == doctest::Approx(1.0).epsilon(1e-15));

  Rng rng = make_rng(3);
  Tensor r = rand_tensor({5, 9}, rng, false, -30.0, 30.0);
  Tensor yr = softmax_rows(r);
  for (int i = 0; i < 5; ++i) {
    double s = 0.0;
    for (int j = 0; j < 9; ++j) {
      CHECK(yr.at(i, j) >= 0.0);
      s += yr.at(i, j);
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("cross entropy on uniform logits is log K") {
  Tensor logits = Tensor::zeros({4, 64});
  Tensor loss = cross_entropy(logits, {0, 5, 63, 7});
  CHECK(loss.item() == doctest::Approx(std::log(64.0)).epsilon(1e-12));
  CHECK(std::log(64.0) == doctest::Approx(4.1589).epsilon(1e-4));
  CHECK_THROWS_AS(cross_entropy(logits, {0, 1, 2}), ShapeError);
  CHECK_THROWS_AS(cross_entropy(logits, {0, 5, 64, 7}), IndexError);
}

TEST_CASE("backward basics") {
  Rng rng = make_rng(21);
  Tensor x = rand_tensor({3, 4}, rng, true);

  SUBCASE("sum gives ones") {
    Tape tape;
    Tensor loss = sum(x);
    tape.run_backward(loss);
    for (int64_t i = 0; i < x.size(); ++i) CHECK(x.grad()[i] == 1.0);
  }
  SUBCASE("sum of squares gives 2x") {
    Tape tape;
    Tensor loss = sum(mul(x, x));
    tape.run_backward(loss);
    for (int64_t i = 0; i < x.size(); ++i)
      CHECK(x.grad()[i] == doctest::Approx(2.0 * x.data()[i]).epsilon(1e-15));
  }
  SUBCASE("grads accumulate across passes") {
    for (int pass = 0; pass < 2; ++pass) {
      Tape tape;
      tape.run_backward(sum(x));
    }
    for (int64_t i = 0; i < x.size(); ++i) CHECK(x.grad()[i] == 2.0);
  }
  SUBCASE("non-scalar loss rejected") {
    Tape tape;
    Tensor y = mul(x, x);
    CHECK_THROWS_AS(tape.run_backward(y), ContractError);
  }
  SUBCASE("foreign loss rejected") {
    Tensor stray = Tensor::scalar(1.0);
    Tape tape;
    CHECK_THROWS_AS(tape.run_backward(stray), ContractError);
  }
}

TEST_CASE("tape records execution in topological order") {
  Rng rng = make_rng(22);
  Tensor a = rand_tensor({4, 4}, rng, true);
  Tensor b = rand_tensor({4, 4}, rng, true);
  Tape tape;
  Tensor loss = sum(gelu(add(matmul(a, b), mul(a, b))));
  std::map<uint64_t, size_t> produced_at;
  const auto& recs = tape.records();
  CHECK(recs.size() == 5);
  for (size_t i = 0; i < recs.size(); ++i) {
    for (uint64_t in : recs[i].ins) {
      auto it = produced_at.find(in);
      if (it != produced_at.end()) CHECK(it->second < i);
    }
    produced_at[recs[i].out] = i;
  }
  tape.run_backward(loss);
  CHECK(tape.op_count() == 0);  // cleared after the sweep
}

TEST_CASE("gradient only flows to connected inputs") {
  Rng rng = make_rng(23);
  Tensor x = rand_tensor({2, 3}, rng, true);
  Tensor mask = Tensor::from_data({2, 3}, {1, 0, 1, 0, 1, 0});  // constant
  Tape tape;
  tape.run_backward(sum(mul(x, mask)));
  CHECK_FALSE(mask.has_grad());
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j) CHECK(x.grad()[i * 3 + j] == mask.at(i, j));
}

TEST_CASE("finite differences validate every op") {
  Rng rng = make_rng(31);
  const int seeds = 3;
  auto audit = [&](const char* name, std::function<Tensor(std::vector<Tensor>&)> op,
                   std::function<std::vector<Tensor>(Rng&)> make_leaves) {
    auto f = gfv::testing::weighted(std::move(op));
    for (int s = 0; s < seeds; ++s) {
      std::vector<Tensor> leaves = make_leaves(rng);
      const double err = fd_max_rel_err(f, leaves, rng);
      INFO(std::string(name) << " seed " << s);
      CHECK(err < 1e-4);
    }
  };

  audit("matmul", [](std::vector<Tensor>& l) { return matmul(l[0], l[1]); },
        [](Rng& r) {
          return std::vector<Tensor>{rand_tensor({3, 5}, r), rand_tensor({5, 4}, r)};
        });
  audit("add", [](std::vector<Tensor>& l) { return add(l[0], l[1]); },
        [](Rng& r) {
          return std::vector<Tensor>{rand_tensor({4, 3}, r), rand_tensor({4, 3}, r)};
        });
  audit("add_row_bias", [](std::vector<Tensor>& l) { return add_row_bias(l[0], l[1]); },
        [](Rng& r) {
          return std::vector<Tensor>{rand_tensor({4, 6}, r), rand_tensor({6}, r)};
        });
  audit("mul", [](std::vector<Tensor>& l) { return mul(l[0], l[1]); },
        [](Rng& r) {
          return std::vector<Tensor>{rand_tensor({3, 3}, r), rand_tensor({3, 3}, r)};
        });
  audit("scale", [](std::vector<Tensor>& l) { return scale(l[0], -1.7); },
        [](Rng& r) { return std::vector<Tensor>{rand_tensor({5, 2}, r)}; });
  audit("sum", [](std::vector<Tensor>& l) { return reshape(sum(l[0]), {1, 1}); },
        [](Rng& r) { return std::vector<Tensor>{rand_tensor({3, 7}, r)}; });
  audit("softmax_rows", [](std::vector<Tensor>& l) { return softmax_rows(l[0]); },
        [](Rng& r) { return std::vector<Tensor>{rand_tensor({4, 5}, r, true, -3, 3)}; });
  audit("cross_entropy",
        [](std::vector<Tensor>& l) {
          return reshape(cross_entropy(l[0], {1, 0, 3}), {1, 1});
        },
        [](Rng& r) { return std::vector<Tensor>{rand_tensor({3, 4}, r, true, -2, 2)}; });
  audit("layer_norm",
        [](std::vector<Tensor>& l) { return layer_norm(l[0], l[1], l[2]); },
        [](Rng& r) {
          return std::vector<Tensor>{rand_tensor({4, 8}, r), rand_tensor({8}, r, true, 0.5, 1.5),
                                     rand_tensor({8}, r)};
        });
  audit("gelu", [](std::vector<Tensor>& l) { return gelu(l[0]); },
        [](Rng& r) { return std::vector<Tensor>{rand_tensor({4, 4}, r, true, -3, 3)}; });
  audit("embedding_lookup",
        [](std::vector<Tensor>& l) { return embedding_lookup(l[0], {2, 0, 2, 4}); },
        [](Rng& r) { return std::vector<Tensor>{rand_tensor({5, 3}, r)}; });
  audit("transpose", [](std::vector<Tensor>& l) { return transpose(l[0]); },
        [](Rng& r) { return std::vector<Tensor>{rand_tensor({3, 6}, r)}; });
  audit("reshape", [](std::vector<Tensor>& l) { return reshape(l[0], {2, 6}); },
        [](Rng& r) { return std::vector<Tensor>{rand_tensor({3, 4}, r)}; });
  audit("slice_rows", [](std::vector<Tensor>& l) { return slice_rows(l[0], 1, 4); },
        [](Rng& r) { return std::vector<Tensor>{rand_tensor({5, 3}, r)}; });
  audit("slice_cols", [](std::vector<Tensor>& l) { return slice_cols(l[0], 2, 5); },
        [](Rng& r) { return std::vector<Tensor>{rand_tensor({3, 6}, r)}; });
  audit("concat_rows", [](std::vector<Tensor>& l) { return concat_rows({l[0], l[1]}); },
        [](Rng& r) {
          return std::vector<Tensor>{rand_tensor({2, 4}, r), rand_tensor({3, 4}, r)};
        });
  audit("concat_cols", [](std::vector<Tensor>& l) { return concat_cols({l[0], l[1]}); },
        [](Rng& r) {
          return std::vector<Tensor>{rand_tensor({3, 2}, r), rand_tensor({3, 5}, r)};
        });
}

TEST_CASE("layer_norm normalizes rows") {
  Rng rng = make_rng(41);
  Tensor x = rand_tensor({6, 16}, rng, false, -5.0, 5.0);
  Tensor g = Tensor::full({16}, 1.0);
  Tensor b = Tensor::zeros({16});
  Tensor y = layer_norm(x, g, b);
  for (int i = 0; i < 6; ++i) {
    double m = 0.0, v = 0.0;
    for (int j = 0; j < 16; ++j) m += y.at(i, j);
    m /= 16;
    for (int j = 0; j < 16; ++j) v += (y.at(i, j) - m) * (y.at(i, j) - m);
    v /= 16;
    CHECK(m == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(v == doctest::Approx(1.0).epsilon(1e-3));  // eps shrinks it slightly
  }
}

TEST_CASE("slicing and concatenation round-trip") {
  Rng rng = make_rng(42);
  Tensor x = rand_tensor({7, 10}, rng, false);
  Tensor back = concat_cols({slice_cols(x, 0, 4), slice_cols(x, 4, 10)});
  CHECK(std::memcmp(back.data(), x.data(), sizeof(double) * x.size()) == 0);
  Tensor back2 = concat_rows({slice_rows(x, 0, 3), slice_rows(x, 3, 7)});
  CHECK(std::memcmp(back2.data(), x.data(), sizeof(double) * x.size()) == 0);
  Tensor tt = transpose(transpose(x));
  CHECK(std::memcmp(tt.data(), x.data(), sizeof(double) * x.size()) == 0);
  CHECK_THROWS_AS(slice_rows(x, 3, 3), IndexError);
  CHECK_THROWS_AS(slice_cols(x, -1, 2), IndexError);
  CHECK_THROWS_AS(concat_cols({x, Tensor::zeros({3, 2})}), ShapeError);
}

TEST_CASE("ops repeated on identical inputs are bitwise identical") {
  Rng rng = make_rng(43);
  Tensor a = rand_tensor({9, 33}, rng, false, -4, 4);
  Tensor b = rand_tensor({33, 21}, rng, false, -4, 4);
  Tensor c1 = matmul(a, b), c2 = matmul(a, b);
  CHECK(std::memcmp(c1.data(), c2.data(), sizeof(double) * c1.size()) == 0);
  Tensor s1 = softmax_rows(a), s2 = softmax_rows(a);
  CHECK(std::memcmp(s1.data(), s2.data(), sizeof(double) * s1.size()) == 0);
  Tensor g1 = gelu(a), g2 = gelu(a);
  CHECK(std::memcmp(g1.data(), g2.data(), sizeof(double) * g1.size()) == 0);
}
