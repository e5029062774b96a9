"""The chat endpoint client, exercised hermetically against the bundled stub.

The same prompt-assembly and client code that would talk to a real
OpenAI-compatible endpoint (configure LASP_LLM_ENDPOINT / LASP_LLM_API_KEY /
LASP_LLM_MODEL) is driven here by the in-process stub server, so the demo
runs offline. The usage ledger records one entry per successful call.
"""

from sceneground import EndpointConfig, UsageLedger, assemble_prompt, parse_utterance_via_llm
from sceneground.builtins import encoder_to_dsl
from sceneground.stub_server import StubServer

bundle = assemble_prompt("init_generation", relation="far",
                         example=encoder_to_dsl("near"))
print("generation prompt for 'far' (first lines):")
for line in bundle.user.splitlines()[:4]:
    print("  " + line)
print("  ...")

REPLY = ('Sure! {"category": "chair", "relations":'
         ' [{"relation_name": "near", "objects": [{"category": "table"}]}]}')

ledger = UsageLedger()
with StubServer([REPLY]) as stub:
    config = EndpointConfig(endpoint=stub.base_url, api_key="demo", model="stub")
    expr = parse_utterance_via_llm("the chair near the table", config, ledger)
    print(f"\nstub endpoint at {stub.base_url} answered {stub.request_count} request(s)")

print(f"parsed category: {expr.category!r}, relation: {expr.relations[0].relation!r}")
totals = ledger.totals()
print(f"ledger: {totals['calls']} call(s), {totals['prompt_tokens']} prompt tokens, "
      f"{totals['completion_tokens']} completion tokens")
