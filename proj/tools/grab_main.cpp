#include <functional>
#include <string>

#include <CLI11.hpp>

#include "grab/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"example-ordering toolkit: herding, vector balancing, and ordered SGD"};
  app.require_subcommand(1);

  grab::BalanceDemoOptions demo;
  std::string demo_balancer = "naive";
  auto* bd = app.add_subcommand("balance-demo",
                                "balance-then-reorder rounds on a vector set; emits prefix-norm "
                                "curves and the per-round objective history");
  bd->add_option("--n", demo.n, "vector count (generated data)");
  bd->add_option("--d", demo.d, "vector dimension (generated data)");
  bd->add_option("--rounds", demo.rounds, "balance-reorder rounds (0 = baseline only)");
  bd->add_option("--balancer", demo_balancer, "sign rule")
      ->check(CLI::IsMember({"naive", "walk"}));
  bd->add_option("--c", demo.c, "walk bound parameter; <= 0 picks the default");
  bd->add_option("--seed", demo.seed, "data/baseline/balancer seed");
  bd->add_option("--out", demo.out, "output CSV path")->required();
  bd->add_option("--input", demo.input, "read vectors from a CSV or GRABVEC1 file instead");

  grab::TrainOptions train;
  std::string train_balancer = "naive";
  auto* tr = app.add_subcommand("train", "permutation-based SGD with a pluggable ordering strategy");
  tr->add_option("--problem", train.problem, "quad | logreg | mlp | csv:<path>");
  tr->add_option("--n", train.n, "example count (generated problems)");
  tr->add_option("--d", train.d, "parameter dim (quad/logreg) or input dim (mlp)");
  tr->add_option("--epochs", train.epochs, "epoch count");
  tr->add_option("--lr", train.lr, "step size");
  tr->add_option("--strategy", train.strategy, "rr | so | flipflop | greedy | grab | grab1 | fixed:<path>");
  tr->add_option("--momentum", train.momentum, "heavy-ball coefficient in [0,1)");
  tr->add_option("--seed", train.seed, "run seed (weights, orders, data)");
  tr->add_option("--out", train.out, "trace CSV path (a .json mirror is written alongside)");
  tr->add_option("--l2", train.l2, "l2 regularization strength");
  tr->add_option("--order-out", train.order_out, "write the final order to this path");
  tr->add_option("--stale-cap-bytes", train.stale_cap_bytes,
                 "refuse stale-gradient storage beyond this many bytes");
  tr->add_option("--balancer", train_balancer, "sign rule for grab/grab1")
      ->check(CLI::IsMember({"naive", "walk"}));
  tr->add_option("--c", train.c, "walk bound parameter; <= 0 picks the default");

  grab::AdversarialOptions adv;
  auto* ad = app.add_subcommand("adversarial",
                                "greedy-vs-random herding objective on the hard 2-d construction");
  ad->add_option("--n-list", adv.n_list, "set sizes (even)")->delimiter(',');
  ad->add_option("--seeds", adv.seeds, "random permutations per n");
  ad->add_option("--out", adv.out, "output CSV path")->required();

  // the bundled option parser converts an empty value string to 0, which would
  // silently freeze a run invoked as e.g. --lr "$LR" with LR unset
  const std::function<std::string(const std::string&)> nonempty = [](const std::string& s) {
    return s.empty() ? std::string("value must not be empty") : std::string();
  };
  for (auto* sub : {bd, tr, ad})
    for (CLI::Option* opt : sub->get_options())
      if (opt->get_expected_min() > 0) opt->check(nonempty, "", "NONEMPTY");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? grab::kExitOk : grab::kExitUsage;
  }

  if (bd->parsed()) {
    demo.balancer = demo_balancer == "walk" ? grab::BalancerKind::Walk : grab::BalancerKind::Naive;
    return grab::cmd_balance_demo(demo);
  }
  if (tr->parsed()) {
    train.balancer = train_balancer == "walk" ? grab::BalancerKind::Walk : grab::BalancerKind::Naive;
    return grab::cmd_train(train);
  }
  if (ad->parsed()) return grab::cmd_adversarial(adv);
  return grab::kExitUsage;
}
