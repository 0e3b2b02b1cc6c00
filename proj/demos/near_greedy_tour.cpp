// Builds a few environments, constructs set-valued policies and prints their
// sizes and worst-case guarantees.

#include <cstdio>

#include "svp/svp.hpp"

using namespace svp;

namespace {

void show(const char* name, const TabularMdp& mdp, double zeta) {
  const OptimalSolution optimal = value_iteration(mdp);
  std::printf("%s, zeta %.2f\n", name, zeta);
  for (const std::string& algo : construction_names()) {
    try {
      const Construction built = construct_svp(mdp, optimal, algo, zeta);
      const SvpMetrics m = compute_metrics(mdp, built.policy.sets, optimal.v);
      std::printf("  %-16s converged %-3s  avg size %.2f  worst ratio %s\n", algo.c_str(),
                  built.converged() ? "yes" : "no", m.average_size_decision,
                  m.worst_ratio ? std::to_string(*m.worst_ratio).c_str() : "n/a");
    } catch (const std::exception& e) {
      std::printf("  %-16s %s\n", algo.c_str(), e.what());
    }
  }
}

}  // namespace

int main() {
  show("Chain-5", build_chain(5, 0, 0.9), 0.05);
  show("CyclicChain-5", build_cyclic_chain(5, 0, 0.9), 0.2);
  show("FrozenLake-8x8", build_frozen_lake("8x8", 0.9), 0.05);

  // Walk Chain-5 picking the worst offered action at every step.
  const TabularMdp chain = build_chain(5, 0, 0.9);
  const OptimalSolution optimal = value_iteration(chain);
  const SetValuedPolicy policy = near_greedy_construct_dag(chain, optimal.v, 0.05);
  const QTable q_pi = svp_policy_evaluation(chain, policy.sets);
  double total = 0.0;
  double discount = 1.0;
  for (StateIndex s = 0; !chain.is_terminal(s);) {
    ActionIndex worst = policy.sets[s].members().front();
    for (ActionIndex a : policy.sets[s].members()) {
      if (q_pi(s, a) < q_pi(s, worst)) worst = a;
    }
    total += discount * chain.reward(s, worst);
    discount *= chain.gamma();
    s = chain.successors(s, worst).front().next;
  }
  std::printf("adversarial return %.4f, guarantee %.4f, V* %.4f\n", total, 0.95 * optimal.v[0], optimal.v[0]);
}
