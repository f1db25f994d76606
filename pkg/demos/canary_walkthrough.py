"""Mint a hybrid canary, push it through the transform chains, scan each result.

    python demos/canary_walkthrough.py
"""

from canarykit import ScanPolicy, TokenRegistry, derive_token, scan, stack_encode
from canarykit.transport import CHAINS, apply_chain, chain_available

KEY = b"demo organisation key"


def main():
    token = derive_token(KEY, "shares/legal/settlement-draft.txt", "hmac")
    registry = TokenRegistry()
    registry.add_token(token)

    canary = stack_encode("M6", token)
    print(f"token {token.hex()}  canary {len(canary)} chars")
    print(canary[:160].encode("unicode_escape").decode() + " ...\n")

    for chain in CHAINS:
        if not chain_available(chain):
            print(f"{chain:<11} skipped (set CANARYKIT_PARAPHRASE_CMD)")
            continue
        verdict = scan(apply_chain(chain, canary), registry, ScanPolicy(early_terminate=False))
        found = verdict.layer if verdict.matched else "-"
        print(f"{chain:<11} matched={verdict.matched!s:<5} first layer={found}")


if __name__ == "__main__":
    main()
