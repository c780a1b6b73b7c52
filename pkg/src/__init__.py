'''
Simulator, policies, LLM agents and the experiment harness of invsim
'''
