"""
Monte-Carlo checks of the geometric lemmas
==========================================

"""

from flatfit.verify import LEMMA_IDS, verify_lemma

# deterministic statements must never fail; probabilistic ones must hit
# their success probability up to a 0.02 slack
for lid in LEMMA_IDS:
    rep = verify_lemma(lid, trials=500, rng=0)
    print(f"{lid:<16} failures={rep.failures:<4} worst margin={rep.worst_margin:+.3g}  "
          f"{'PASS' if rep.passed else 'FAIL'}")

# the same seed gives the same report
a = verify_lemma("rotation-step", trials=200, rng=5).to_dict()
b = verify_lemma("rotation-step", trials=200, rng=5).to_dict()
print("reproducible:", a == b)
