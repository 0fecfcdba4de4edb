#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "synli/tensor.hpp"

using namespace synli;

TEST_CASE("matmul hand examples") {
    Tensor eye = Tensor::from({2, 2}, {1, 0, 0, 1});
    Tensor m = Tensor::from({2, 2}, {1, 2, 3, 4});
    Tensor r = matmul(eye, m);
    CHECK(r.data() == m.data());

    Tensor a = Tensor::from({1, 2}, {1, 2});
    Tensor b = Tensor::from({2, 1}, {3, 4});
    Tensor c = matmul(a, b);
    CHECK(c.shape() == Shape{1, 1});
    CHECK(c.at(0, 0) == 11.0);

    CHECK_THROWS_AS(matmul(a, a), DimensionError);
}

TEST_CASE("matmul gradient of sum equals ones*b^T") {
    Rng rng(7);
    Tensor a = Tensor::randn({3, 4}, rng, 1.0, true);
    Tensor b = Tensor::randn({4, 2}, rng);
    Tape tape;
    Tensor loss = sum_all(matmul(a, b));
    tape.backward(loss);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 4; ++j) {
            double expect = b.at(j, 0) + b.at(j, 1);
            CHECK(a.grad()[static_cast<size_t>(i * 4 + j)] == doctest::Approx(expect).epsilon(1e-12));
        }
}

TEST_CASE("concat shapes and identity") {
    Tensor v4 = Tensor::from({4}, {1, 2, 3, 4});
    Tensor v3 = Tensor::from({3}, {5, 6, 7});
    Tensor v3b = Tensor::from({3}, {8, 9, 10});
    Tensor c = concat({v4, v3, v3b}, 0);
    CHECK(c.shape() == Shape{10});

    Tensor single = concat({v4}, 0);
    CHECK(single.data() == v4.data());

    Tensor m1 = Tensor::from({2, 2}, {1, 2, 3, 4});
    Tensor m2 = Tensor::from({2, 3}, {5, 6, 7, 8, 9, 10});
    CHECK_THROWS_AS(concat({m1, m2}, 0), DimensionError);
    Tensor wide = concat({m1, m2}, 1);
    CHECK(wide.shape() == Shape{2, 5});
    // concat followed by slicing back out is the identity, bit-exact
    for (int i = 0; i < 2; ++i) {
        CHECK(wide.at(i, 0) == m1.at(i, 0));
        CHECK(wide.at(i, 1) == m1.at(i, 1));
        for (int j = 0; j < 3; ++j) CHECK(wide.at(i, 2 + j) == m2.at(i, j));
    }
}

TEST_CASE("concat backward routes gradient slices bit-exactly") {
    Tensor a = Tensor::from({2}, {1, 2}, true);
    Tensor b = Tensor::from({3}, {3, 4, 5}, true);
    Tape tape;
    Tensor c = concat({a, b}, 0);
    Tensor w = Tensor::from({5}, {10, 20, 30, 40, 50});
    tape.backward(dot(c, w));
    CHECK(a.grad() == std::vector<double>{10, 20});
    CHECK(b.grad() == std::vector<double>{30, 40, 50});
}

TEST_CASE("softmax rows") {
    Tensor x = Tensor::from({1, 3}, {0, 0, 0});
    Tensor y = softmax_rows(x);
    for (int j = 0; j < 3; ++j) CHECK(y.at(0, j) == doctest::Approx(1.0 / 3));

    Tensor big = Tensor::from({1, 2}, {1000, 0});
    Tensor yb = softmax_rows(big);
    CHECK(yb.all_finite());
    CHECK(yb.at(0, 0) == doctest::Approx(1.0));
    CHECK(yb.at(0, 1) == doctest::Approx(0.0).epsilon(1e-12));

    Rng rng(3);
    Tensor r = Tensor::randn({4, 5}, rng);
    Tensor yr = softmax_rows(r);
    for (int i = 0; i < 4; ++i) {
        double s = 0;
        for (int j = 0; j < 5; ++j) {
            CHECK(yr.at(i, j) >= 0.0);
            s += yr.at(i, j);
        }
        CHECK(std::abs(s - 1.0) < 1e-6);
    }

    Tensor mask = Tensor::from({1, 3}, {1, 0, 1});
    Tensor ym = softmax_rows(Tensor::from({1, 3}, {1, 5, 1}), &mask);
    CHECK(ym.at(0, 1) == 0.0);  // exactly
    CHECK(ym.at(0, 0) + ym.at(0, 2) == doctest::Approx(1.0));

    Tensor dead = Tensor::from({1, 3}, {0, 0, 0});
    CHECK_THROWS_AS(softmax_rows(Tensor::from({1, 3}, {1, 2, 3}), &dead), ContractError);
}

TEST_CASE("cross entropy known value") {
    Tensor logits = Tensor::from({1, 2}, {0, 0});
    Tensor loss = cross_entropy_rows(logits, {0});
    CHECK(loss.value() == doctest::Approx(std::log(2.0)));

    Tensor two = Tensor::from({2, 2}, {0, 0, 0, 0});
    CHECK(cross_entropy_rows(two, {0, 1}, Reduction::Sum).value() ==
          doctest::Approx(2.0 * std::log(2.0)));
    CHECK(cross_entropy_rows(two, {0, 1}, Reduction::Mean).value() ==
          doctest::Approx(std::log(2.0)));
}

TEST_CASE("backward analytic and empty cases") {
    Tensor x = Tensor::from({3}, {1, 2, 3}, true);
    {
        Tape tape;
        Tensor loss = sum_all(mul(x, x));
        tape.backward(loss);
        CHECK(x.grad() == std::vector<double>{2, 4, 6});
    }
    {
        // grads accumulate across losses until explicitly reset
        x.zero_grad();
        for (int pass = 0; pass < 2; ++pass) {
            Tape tape;
            tape.backward(sum_all(mul(x, x)));
        }
        CHECK(x.grad() == std::vector<double>{4, 8, 12});
    }
    {
        Tape tape;
        Tensor c = Tensor::from({2}, {1, 2});
        Tensor loss = sum_all(c);
        tape.backward(loss);  // no requires_grad ancestors: nothing to populate
        CHECK(!c.has_grad());
        CHECK_THROWS_AS(tape.backward(c), ContractError);  // non-scalar loss
    }
}

TEST_CASE("max_axis0 routes gradient to first argmax") {
    Tensor m = Tensor::from({3, 2}, {1, 5, 7, 5, 7, 2}, true);
    Tape tape;
    tape.backward(sum_all(max_axis0(m)));
    CHECK(m.grad() == std::vector<double>{0, 1, 1, 0, 0, 0});
}

TEST_CASE("dropout semantics") {
    Rng rng(11);
    Tensor x = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor eval_out = dropout_t(x, 0.5, rng, false);
    CHECK(eval_out.data() == x.data());
    Tensor zero_rate = dropout_t(x, 0.0, rng, true);
    CHECK(zero_rate.data() == x.data());
    Tensor kept = dropout_t(x, 0.4, rng, true);
    for (size_t i = 0; i < 6; ++i) {
        double v = kept.data()[i];
        bool zero = v == 0.0;
        bool scaled = std::abs(v - x.data()[i] / 0.6) < 1e-12;
        CHECK((zero || scaled));
    }
}

TEST_CASE("per-op gradient checks, 10 seeds") {
    for (uint64_t seed = 1; seed <= 10; ++seed) {
        Rng rng(seed);
        auto randm = [&](int r, int c) { return Tensor::randu({r, c}, rng, -1.0, 1.0); };
        auto randv = [&](int n) { return Tensor::randu({n}, rng, -1.0, 1.0); };

        struct Case {
            const char* name;
            std::function<Tensor(const std::vector<Tensor>&)> f;
            std::vector<Tensor> inputs;
        };
        std::vector<Case> cases = {
            {"matmul", [](const std::vector<Tensor>& in) { return sum_all(matmul(in[0], in[1])); },
             {randm(3, 4), randm(4, 2)}},
            {"matvec", [](const std::vector<Tensor>& in) { return sum_all(matvec(in[0], in[1])); },
             {randm(3, 4), randv(4)}},
            {"transpose",
             [](const std::vector<Tensor>& in) { return sum_all(mul(transpose(in[0]), in[1])); },
             {randm(2, 3), randm(3, 2)}},
            {"add_sub_mul_scale",
             [](const std::vector<Tensor>& in) {
                 return sum_all(mul(add(in[0], in[1]), scale(sub(in[0], in[1]), 0.7)));
             },
             {randm(3, 3), randm(3, 3)}},
            {"add_rowvec",
             [](const std::vector<Tensor>& in) {
                 return sum_all(tanh_t(add_rowvec(in[0], in[1])));
             },
             {randm(3, 4), randv(4)}},
            {"concat_rows",
             [](const std::vector<Tensor>& in) {
                 return sum_all(tanh_t(concat({in[0], in[1]}, 1)));
             },
             {randm(2, 3), randm(2, 2)}},
            {"gather_stack",
             [](const std::vector<Tensor>& in) {
                 Tensor g = gather_rows(in[0], {0, 2, 0});
                 return dot(row(g, 1), row(g, 2));
             },
             {randm(3, 4)}},
            {"stack_rows",
             [](const std::vector<Tensor>& in) {
                 return sum_all(tanh_t(stack_rows({in[0], in[1]})));
             },
             {randv(4), randv(4)}},
            {"reductions",
             [](const std::vector<Tensor>& in) {
                 return add(dot(sum_axis0(in[0]), mean_axis0(in[0])), sum_all(max_axis0(in[0])));
             },
             {randm(3, 4)}},
            {"nonlinearities",
             [](const std::vector<Tensor>& in) {
                 return sum_all(mul(sigmoid_t(in[0]), add(tanh_t(in[0]), relu_t(in[1]))));
             },
             {randm(2, 3), randm(2, 3)}},
            {"softmax",
             [](const std::vector<Tensor>& in) {
                 return sum_all(mul(softmax_rows(in[0]), in[1]));
             },
             {randm(2, 4), randm(2, 4)}},
            {"softmax_matmul",
             [](const std::vector<Tensor>& in) {
                 return sum_all(mul(softmax_rows(matmul(in[0], in[1])), in[2]));
             },
             {randm(2, 3), randm(3, 4), randm(2, 4)}},
            {"cross_entropy",
             [](const std::vector<Tensor>& in) {
                 return cross_entropy_rows(matmul(in[0], in[1]), {1, 0});
             },
             {randm(2, 3), randm(3, 3)}},
            {"reshape_dot",
             [](const std::vector<Tensor>& in) {
                 return dot(reshape(in[0], {6}), reshape(in[1], {6}));
             },
             {randm(2, 3), randm(3, 2)}},
        };
        for (auto& c : cases) {
            GradCheckReport rep = grad_check(c.f, c.inputs, 1e-3, 1e-4);
            INFO(c.name << " seed " << seed << " max_rel_error " << rep.max_rel_error << " at "
                        << rep.worst_input);
            CHECK(rep.pass);
        }
    }
}

TEST_CASE("grad_check catches a planted fault") {
    Rng rng(5);
    Tensor x = Tensor::randu({3}, rng, 0.5, 1.5);
    // detach() severs the tape, so the recorded gradient is x.detach() (treated
    // as a constant) while the true derivative of x*x is 2x
    auto wrong = [](const std::vector<Tensor>& in) { return sum_all(mul(in[0], in[0].detach())); };
    GradCheckReport rep = grad_check(wrong, {x}, 1e-3, 1e-4);
    CHECK(!rep.pass);
    CHECK(rep.max_rel_error > 0.1);
}

TEST_CASE("adam analytic first step and identity") {
    Tensor w = Tensor::from({1}, {1.0}, true);
    w.grad()[0] = 1.0;
    AdamState st;
    adam_step({w}, st, 0.01);
    CHECK(w.data()[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-6));

    Tensor w2 = Tensor::from({1}, {2.5}, true);
    w2.grad()[0] = 0.0;
    AdamState st2;
    adam_step({w2}, st2, 0.01);
    CHECK(w2.data()[0] == doctest::Approx(2.5).epsilon(1e-12));

    Tensor no_grad = Tensor::from({1}, {1.0}, true);
    AdamState st3;
    CHECK_THROWS_AS(adam_step({no_grad}, st3, 0.01), ContractError);
}

TEST_CASE("adam converges on (w-3)^2") {
    Tensor w = Tensor::from({1}, {0.0}, true);
    AdamState st;
    for (int i = 0; i < 100; ++i) {
        w.zero_grad();
        Tape tape;
        Tensor diff = add(w, Tensor::from({1}, {-3.0}));
        tape.backward(sum_all(mul(diff, diff)));
        adam_step({w}, st, 0.1);
    }
    CHECK(std::abs(w.data()[0] - 3.0) < 0.1);
}

TEST_CASE("rng determinism and normal moments") {
    Rng a(42), b(42);
    Tensor ta = Tensor::randn({50}, a);
    Tensor tb = Tensor::randn({50}, b);
    CHECK(ta.data() == tb.data());

    Rng c(42);
    double mean = 0, sq = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        double v = c.normal();
        mean += v;
        sq += v * v;
    }
    mean /= n;
    double stddev = std::sqrt(sq / n - mean * mean);
    CHECK(std::abs(mean) < 0.02);
    CHECK(std::abs(stddev - 1.0) < 0.02);
}

TEST_CASE("tensor basics and finiteness") {
    CHECK_THROWS_AS(Tensor::from({2, 2}, {1, 2, 3}), DimensionError);
    Tensor t = Tensor::full({2, 2}, 1.5);
    CHECK(t.all_finite());
    t.mut(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK(!t.all_finite());
    Tensor cl = Tensor::from({2}, {1, 2}, true).clone();
    CHECK(cl.requires_grad());
}
