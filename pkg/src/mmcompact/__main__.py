from mmcompact.cli import main

main()
